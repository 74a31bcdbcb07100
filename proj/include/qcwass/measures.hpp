#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qcwass/error.hpp"
#include "qcwass/quadrature.hpp"
#include "qcwass/random.hpp"

namespace qcwass {

enum class MeasureKind {
  empirical,
  uniform,
  truncated_gaussian,
  truncated_gumbel,
  triangular,
  piecewise_gqf,
  smooth_gqf,
};

inline const char* to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::empirical: return "empirical";
    case MeasureKind::uniform: return "uniform";
    case MeasureKind::truncated_gaussian: return "truncated-gaussian";
    case MeasureKind::truncated_gumbel: return "truncated-gumbel";
    case MeasureKind::triangular: return "triangular";
    case MeasureKind::piecewise_gqf: return "piecewise-gqf";
    case MeasureKind::smooth_gqf: return "smooth-gqf";
  }
  return "unknown";
}

struct Support {
  double lower;
  double upper;
};

// Piecewise-constant quantile function: the right-continuous gqf equals
// values[k] on [levels[k], levels[k+1]) and the left-continuous one equals it
// on (levels[k], levels[k+1]]. levels run from 0 to 1 inclusive.
struct StepGqf {
  std::vector<double> levels;
  std::vector<double> values;
};

// Implementation interface behind UnivariateMeasure. Levels passed to the
// quantile functions are already validated to lie in [0, 1].
class MeasureModel {
 public:
  virtual ~MeasureModel() = default;
  virtual MeasureKind kind() const = 0;
  virtual double cdf(double t) const = 0;
  virtual double quantile_left(double a) const = 0;
  virtual double quantile_right(double a) const = 0;
  virtual Support support() const = 0;
  virtual std::string describe() const = 0;

  // Exact step representation when the gqf is piecewise constant.
  virtual std::optional<StepGqf> steps() const { return std::nullopt; }

  // Levels in (0, 1) where the gqf may jump or lose smoothness; quadrature
  // routines split there.
  virtual std::vector<double> breakpoints() const { return {}; }
};

namespace detail {

// n * a rounded to the nearest integer when it is within a few ulps of one,
// so that levels computed as k / n index order statistic k exactly.
inline double snapped_product(std::size_t n, double a) {
  const double x = static_cast<double>(n) * a;
  const double r = std::round(x);
  if (std::abs(x - r) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x)) return r;
  return x;
}

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Smallest t in [lo, hi] with cdf(t) >= a, to `tol` absolute.
template <class Cdf>
double invert_cdf(const Cdf& cdf, double a, double lo, double hi, double tol = 1e-12) {
  if (a <= 0.0) return lo;
  if (a >= 1.0) return hi;
  if (cdf(lo) >= a) return lo;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (cdf(mid) >= a) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

// Ordered observations X_(1) <= ... <= X_(n).
class EmpiricalSample {
 public:
  EmpiricalSample() = default;
  explicit EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("EmpiricalSample: at least one observation required");
    for (double v : values_) {
      if (!std::isfinite(v)) throw DomainError("EmpiricalSample: non-finite observation");
    }
    std::sort(values_.begin(), values_.end());
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  // 1-based order statistic.
  double order_statistic(std::size_t i) const { return values_.at(i - 1); }

 private:
  std::vector<double> values_;
};

class EmpiricalModel final : public MeasureModel {
 public:
  explicit EmpiricalModel(EmpiricalSample sample) : sample_(std::move(sample)) {}

  MeasureKind kind() const override { return MeasureKind::empirical; }

  double cdf(double t) const override {
    const auto v = sample_.values();
    const auto count = std::upper_bound(v.begin(), v.end(), t) - v.begin();
    return static_cast<double>(count) / static_cast<double>(v.size());
  }

  // X_(ceil(n a)), the smallest a-quantile.
  double quantile_left(double a) const override {
    const std::size_t n = sample_.size();
    if (a <= 0.0) return sample_.order_statistic(1);
    auto k = static_cast<std::size_t>(std::ceil(detail::snapped_product(n, a)));
    k = std::clamp<std::size_t>(k, 1, n);
    return sample_.order_statistic(k);
  }

  double quantile_right(double a) const override {
    const std::size_t n = sample_.size();
    if (a >= 1.0) return sample_.order_statistic(n);
    auto k = static_cast<std::size_t>(std::floor(detail::snapped_product(n, a))) + 1;
    k = std::clamp<std::size_t>(k, 1, n);
    return sample_.order_statistic(k);
  }

  Support support() const override {
    return {sample_.values().front(), sample_.values().back()};
  }

  std::optional<StepGqf> steps() const override {
    const std::size_t n = sample_.size();
    StepGqf s;
    s.levels.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) s.levels[k] = static_cast<double>(k) / static_cast<double>(n);
    s.values.assign(sample_.values().begin(), sample_.values().end());
    return s;
  }

  std::vector<double> breakpoints() const override {
    const std::size_t n = sample_.size();
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 1; k < n; ++k) out.push_back(static_cast<double>(k) / static_cast<double>(n));
    return out;
  }

  std::string describe() const override {
    return "empirical(n=" + std::to_string(sample_.size()) + ")";
  }

  const EmpiricalSample& sample() const noexcept { return sample_; }

 private:
  EmpiricalSample sample_;
};

class UniformModel final : public MeasureModel {
 public:
  UniformModel(double lower, double upper) : lower_(lower), upper_(upper) {
    if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
      throw DomainError("uniform: require finite lower < upper");
    }
  }
  MeasureKind kind() const override { return MeasureKind::uniform; }
  double cdf(double t) const override { return detail::clamp01((t - lower_) / (upper_ - lower_)); }
  double quantile_left(double a) const override { return lower_ + a * (upper_ - lower_); }
  double quantile_right(double a) const override { return quantile_left(a); }
  Support support() const override { return {lower_, upper_}; }
  std::string describe() const override {
    return "uniform(" + detail::fmt_double(lower_) + ", " + detail::fmt_double(upper_) + ")";
  }

 private:
  double lower_;
  double upper_;
};

class TriangularModel final : public MeasureModel {
 public:
  TriangularModel(double lower, double mode, double upper)
      : lower_(lower), mode_(mode), upper_(upper) {
    if (!(std::isfinite(lower) && std::isfinite(mode) && std::isfinite(upper) && lower < upper &&
          lower <= mode && mode <= upper)) {
      throw DomainError("triangular: require lower <= mode <= upper and lower < upper");
    }
  }
  MeasureKind kind() const override { return MeasureKind::triangular; }

  double cdf(double t) const override {
    if (t <= lower_) return 0.0;
    if (t >= upper_) return 1.0;
    const double width = upper_ - lower_;
    if (t <= mode_) return (t - lower_) * (t - lower_) / (width * (mode_ - lower_));
    return 1.0 - (upper_ - t) * (upper_ - t) / (width * (upper_ - mode_));
  }

  double quantile_left(double a) const override {
    const double width = upper_ - lower_;
    const double split = (mode_ - lower_) / width;
    if (a <= split) return lower_ + std::sqrt(a * width * (mode_ - lower_));
    return upper_ - std::sqrt((1.0 - a) * width * (upper_ - mode_));
  }
  double quantile_right(double a) const override { return quantile_left(a); }
  Support support() const override { return {lower_, upper_}; }
  std::string describe() const override {
    return "triangular(" + detail::fmt_double(lower_) + ", " + detail::fmt_double(mode_) + ", " +
           detail::fmt_double(upper_) + ")";
  }

 private:
  double lower_;
  double mode_;
  double upper_;
};

// Base distribution restricted to [lower, upper] by cdf renormalization;
// quantiles by bracketed bisection of the renormalized cdf.
template <class BaseCdf>
class TruncatedModel : public MeasureModel {
 public:
  TruncatedModel(BaseCdf base, double lower, double upper) : base_(std::move(base)), lower_(lower), upper_(upper) {
    if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
      throw DomainError("truncated distribution: require finite lower < upper");
    }
    base_lower_ = base_(lower_);
    mass_ = base_(upper_) - base_lower_;
    if (!(mass_ > 0.0)) throw DomainError("truncated distribution: no base mass on [lower, upper]");
  }

  double cdf(double t) const override {
    if (t <= lower_) return 0.0;
    if (t >= upper_) return 1.0;
    return detail::clamp01((base_(t) - base_lower_) / mass_);
  }
  double quantile_left(double a) const override {
    return detail::invert_cdf([this](double t) { return cdf(t); }, a, lower_, upper_);
  }
  double quantile_right(double a) const override { return quantile_left(a); }
  Support support() const override { return {lower_, upper_}; }

 protected:
  BaseCdf base_;
  double lower_;
  double upper_;
  double base_lower_ = 0.0;
  double mass_ = 1.0;
};

struct GaussianCdf {
  double mean;
  double sd;
  double operator()(double t) const { return detail::normal_cdf((t - mean) / sd); }
};

// Max-type Gumbel: F(t) = exp(-exp(-(t - location) / scale)).
struct GumbelCdf {
  double location;
  double scale;
  double operator()(double t) const { return std::exp(-std::exp(-(t - location) / scale)); }
};

class TruncatedGaussianModel final : public TruncatedModel<GaussianCdf> {
 public:
  TruncatedGaussianModel(double mean, double sd, double lower, double upper)
      : TruncatedModel(check(mean, sd), lower, upper) {}
  MeasureKind kind() const override { return MeasureKind::truncated_gaussian; }
  std::string describe() const override {
    return "truncated-gaussian(" + detail::fmt_double(base_.mean) + ", " + detail::fmt_double(base_.sd) +
           ", [" + detail::fmt_double(lower_) + ", " + detail::fmt_double(upper_) + "])";
  }

 private:
  static GaussianCdf check(double mean, double sd) {
    if (!(std::isfinite(mean) && std::isfinite(sd) && sd > 0.0)) {
      throw DomainError("truncated-gaussian: require finite mean and sd > 0");
    }
    return {mean, sd};
  }
};

class TruncatedGumbelModel final : public TruncatedModel<GumbelCdf> {
 public:
  TruncatedGumbelModel(double location, double scale, double lower, double upper)
      : TruncatedModel(check(location, scale), lower, upper) {}
  MeasureKind kind() const override { return MeasureKind::truncated_gumbel; }
  std::string describe() const override {
    return "truncated-gumbel(" + detail::fmt_double(base_.location) + ", " +
           detail::fmt_double(base_.scale) + ", [" + detail::fmt_double(lower_) + ", " +
           detail::fmt_double(upper_) + "])";
  }

 private:
  static GumbelCdf check(double location, double scale) {
    if (!(std::isfinite(location) && std::isfinite(scale) && scale > 0.0)) {
      throw DomainError("truncated-gumbel: require finite location and scale > 0");
    }
    return {location, scale};
  }
};

// Immutable handle to a probability measure on the real line. Cheap to copy;
// safe to share across threads.
class UnivariateMeasure {
 public:
  explicit UnivariateMeasure(std::shared_ptr<const MeasureModel> model) : model_(std::move(model)) {
    if (!model_) throw DomainError("UnivariateMeasure: null model");
  }

  static UnivariateMeasure empirical(EmpiricalSample sample) {
    return UnivariateMeasure(std::make_shared<EmpiricalModel>(std::move(sample)));
  }
  static UnivariateMeasure empirical(std::vector<double> values) {
    return empirical(EmpiricalSample(std::move(values)));
  }
  static UnivariateMeasure point_mass(double at) { return empirical(std::vector<double>{at}); }
  static UnivariateMeasure uniform(double lower, double upper) {
    return UnivariateMeasure(std::make_shared<UniformModel>(lower, upper));
  }
  static UnivariateMeasure triangular(double lower, double mode, double upper) {
    return UnivariateMeasure(std::make_shared<TriangularModel>(lower, mode, upper));
  }
  static UnivariateMeasure truncated_gaussian(double mean, double sd, double lower, double upper) {
    return UnivariateMeasure(std::make_shared<TruncatedGaussianModel>(mean, sd, lower, upper));
  }
  static UnivariateMeasure truncated_gumbel(double location, double scale, double lower, double upper) {
    return UnivariateMeasure(std::make_shared<TruncatedGumbelModel>(location, scale, lower, upper));
  }

  MeasureKind kind() const { return model_->kind(); }
  Support support() const { return model_->support(); }
  std::string describe() const { return model_->describe(); }
  std::optional<StepGqf> steps() const { return model_->steps(); }
  std::vector<double> breakpoints() const { return model_->breakpoints(); }

  double cdf(double t) const {
    if (std::isnan(t)) throw DomainError("cdf: NaN argument");
    return model_->cdf(t);
  }

  // Left-continuous gqf. Level 0 is accepted and returns the lower support
  // endpoint (every built-in kind has bounded support).
  double quantile_left(double a) const {
    check_level(a, "quantile_left");
    return model_->quantile_left(a);
  }
  // Right-continuous gqf; level 1 returns the upper support endpoint.
  double quantile_right(double a) const {
    check_level(a, "quantile_right");
    return model_->quantile_right(a);
  }

  const MeasureModel& model() const noexcept { return *model_; }
  std::shared_ptr<const MeasureModel> model_ptr() const noexcept { return model_; }

  template <class T>
  const T* as() const noexcept {
    return dynamic_cast<const T*>(model_.get());
  }

 private:
  static void check_level(double a, const char* who) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw DomainError(std::string(who) + ": level " + detail::fmt_double(a) + " outside [0, 1]");
    }
  }

  std::shared_ptr<const MeasureModel> model_;
};

inline double cdf(const UnivariateMeasure& m, double t) { return m.cdf(t); }
inline double quantile_left(const UnivariateMeasure& m, double a) { return m.quantile_left(a); }
inline double quantile_right(const UnivariateMeasure& m, double a) { return m.quantile_right(a); }

namespace detail {

// Integral of (f - g)^2 over [0, 1] for two step gqfs, merging breakpoints.
inline double step_l2_squared(const StepGqf& f, const StepGqf& g) {
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  double lo = 0.0;
  while (i < f.values.size() && j < g.values.size()) {
    const double hi = std::min(f.levels[i + 1], g.levels[j + 1]);
    const double diff = f.values[i] - g.values[j];
    if (hi > lo) acc += diff * diff * (hi - lo);
    lo = std::max(lo, hi);
    if (f.levels[i + 1] <= hi) ++i;
    if (g.levels[j + 1] <= hi) ++j;
  }
  return acc;
}

inline std::vector<double> merged_breakpoints(const UnivariateMeasure& p, const UnivariateMeasure& q) {
  std::vector<double> out = p.breakpoints();
  auto more = q.breakpoints();
  out.insert(out.end(), more.begin(), more.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// Squared 2-Wasserstein distance, the L2([0,1]) distance between the
// right-continuous gqfs.
inline double w2_squared(const UnivariateMeasure& p, const UnivariateMeasure& q,
                         const QuadratureOptions& opts = {}) {
  if (p.model_ptr() == q.model_ptr()) return 0.0;
  const auto sp = p.steps();
  const auto sq = q.steps();
  if (sp && sq) return detail::step_l2_squared(*sp, *sq);
  const auto cuts = detail::merged_breakpoints(p, q);
  auto integrand = [&](double y) {
    const double d = p.quantile_right(y) - q.quantile_right(y);
    return d * d;
  };
  QuadratureOptions local = opts;
  local.max_intervals = std::max(opts.max_intervals, 4 * cuts.size());
  return integrate<double>(integrand, 0.0, 1.0, cuts, local);
}

inline double w2_distance(const UnivariateMeasure& p, const UnivariateMeasure& q,
                          const QuadratureOptions& opts = {}) {
  return std::sqrt(std::max(0.0, w2_squared(p, q, opts)));
}

// Inverse-transform sampling through the left-continuous gqf.
inline EmpiricalSample sample(const UnivariateMeasure& m, std::size_t n, Seed seed) {
  if (n == 0) throw DomainError("sample: n must be at least 1");
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = m.quantile_left(uniform_open_closed(rng));
  return EmpiricalSample(std::move(out));
}

// Kolmogorov-Smirnov statistic sup_t |F_n(t) - F(t)| of a sample against m,
// checking both one-sided limits at every observation.
inline double ks_statistic(const EmpiricalSample& s, const UnivariateMeasure& m) {
  const auto v = s.values();
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double f = m.cdf(v[i]);
    const double f_left = m.cdf(std::nextafter(v[i], -std::numeric_limits<double>::infinity()));
    d = std::max(d, std::abs(static_cast<double>(j) / n - f));
    d = std::max(d, std::abs(static_cast<double>(i) / n - f_left));
    i = j;
  }
  return d;
}

// Asymptotic one-sample KS critical value at significance `level`.
inline double ks_critical_value(std::size_t n, double level) {
  return std::sqrt(-0.5 * std::log(level / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace qcwass
