#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/conic_qp.hpp"
#include "qcwass/error.hpp"
#include "qcwass/measures.hpp"
#include "qcwass/parallel.hpp"
#include "qcwass/perturb.hpp"
#include "qcwass/quadrature.hpp"
#include "qcwass/random.hpp"
#include "qcwass/sos.hpp"

namespace qcwass {

namespace detail {

inline void check_segment(double t0, double t1, int degree, const char* who) {
  if (!(t0 >= 0.0 && t0 < t1 && t1 <= 1.0)) {
    throw DomainError(std::string(who) + ": require 0 <= t0 < t1 <= 1, got [" + fmt_double(t0) + ", " +
                      fmt_double(t1) + "]");
  }
  if (degree < 1) throw DomainError(std::string(who) + ": degree must be at least 1");
}

// (hi^k - lo^k) / k for k = 1 .. count.
inline Eigen::VectorXd power_increments(double lo, double hi, int count) {
  Eigen::VectorXd out(count);
  double plo = 1.0, phi = 1.0;
  for (int k = 1; k <= count; ++k) {
    plo *= lo;
    phi *= hi;
    out[k - 1] = (phi - plo) / k;
  }
  return out;
}

inline Eigen::MatrixXd lebesgue_moments(double lo, double hi, int degree) {
  const Eigen::VectorXd inc = power_increments(lo, hi, 2 * degree + 1);
  Eigen::MatrixXd m(degree + 1, degree + 1);
  for (int i = 0; i <= degree; ++i) {
    for (int j = 0; j <= degree; ++j) m(i, j) = inc[i + j];
  }
  return m;
}

// Moments of a step function on [lo, hi] after the affine change of variable
// u = (x - center) / half_width: entries int u^i g(x(u)) du.
inline Eigen::VectorXd step_moments(const StepGqf& st, double lo, double hi, int degree, double center,
                                    double half_width) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(degree + 1);
  auto first = std::upper_bound(st.levels.begin(), st.levels.end(), lo);
  std::size_t k = first == st.levels.begin() ? 0 : static_cast<std::size_t>(first - st.levels.begin()) - 1;
  for (; k < st.values.size() && st.levels[k] < hi; ++k) {
    const double a = std::max(lo, st.levels[k]);
    const double b = std::min(hi, st.levels[k + 1]);
    if (!(b > a)) continue;
    r += st.values[k] * power_increments((a - center) / half_width, (b - center) / half_width, degree + 1);
  }
  return r;
}

template <class F>
Eigen::VectorXd quadrature_moments(const F& g, const std::vector<double>& hints, double lo, double hi, int degree,
                                   double center, double half_width, const QuadratureOptions& opts) {
  std::vector<double> mapped;
  mapped.reserve(hints.size());
  for (double h : hints) mapped.push_back((h - center) / half_width);
  const double ulo = (lo - center) / half_width;
  const double uhi = (hi - center) / half_width;
  return integrate<Eigen::VectorXd>(
      [&](double u) {
        Eigen::VectorXd v(degree + 1);
        const double val = g(center + half_width * u);
        double p = 1.0;
        for (int i = 0; i <= degree; ++i) {
          v[i] = p * val;
          p *= u;
        }
        return v;
      },
      ulo, uhi, mapped, opts);
}

}  // namespace detail

// M_ij = int_{t0}^{t1} x^{i+j} dx, i, j = 0 .. d.
inline Eigen::MatrixXd moment_matrix(double t0, double t1, int degree) {
  detail::check_segment(t0, t1, degree, "moment_matrix");
  return detail::lebesgue_moments(t0, t1, degree);
}

// Moment vector of an empirical gqf by summing whole order-statistic cells.
// With X_j the j-th smallest value (0-based) on [j/n, (j+1)/n):
//   r_i = 1/(i+1) [ sum_{jl < j < ju} X_j ((j+1)^{i+1} - j^{i+1}) / n^{i+1}
//                   + X_ju (t1^{i+1} - (ju/n)^{i+1})
//                   + X_jl (((jl+1)/n)^{i+1} - t0^{i+1}) ]
// where jl = floor(n t0), ju = floor(n t1). The last term is replaced by
// X_jl (t1^{i+1} - t0^{i+1}) when both ends fall in one cell, and the X_ju
// term is dropped when t1 n is an integer.
inline Eigen::VectorXd empirical_moment_vector(const EmpiricalSample& sample, double t0, double t1, int degree) {
  detail::check_segment(t0, t1, degree, "empirical_moment_vector");
  const std::size_t n = sample.size();
  const double dn = static_cast<double>(n);
  const auto x = sample.values();
  const auto jl = static_cast<std::size_t>(std::floor(detail::snapped_product(n, t0)));
  const auto ju = static_cast<std::size_t>(std::floor(detail::snapped_product(n, t1)));
  Eigen::VectorXd r = Eigen::VectorXd::Zero(degree + 1);
  auto cell = [&](double value, double lo, double hi) {
    if (hi > lo) r += value * detail::power_increments(lo, hi, degree + 1);
  };
  const std::size_t last = std::min(ju, n - 1);
  for (std::size_t j = jl; j <= last; ++j) {
    const double lo = j == jl ? t0 : static_cast<double>(j) / dn;
    const double hi = j == ju ? t1 : static_cast<double>(j + 1) / dn;
    cell(x[j], lo, std::min(hi, t1));
  }
  return r;
}

// r_i = int_{t0}^{t1} x^i F^->_P(x) dx: closed form for step gqfs, adaptive
// quadrature otherwise.
inline Eigen::VectorXd moment_vector(const UnivariateMeasure& p, double t0, double t1, int degree,
                                     const QuadratureOptions& opts = {}) {
  detail::check_segment(t0, t1, degree, "moment_vector");
  if (const auto* emp = p.as<EmpiricalModel>()) return empirical_moment_vector(emp->sample(), t0, t1, degree);
  if (const auto st = p.steps()) return detail::step_moments(*st, t0, t1, degree, 0.0, 1.0);
  return detail::quadrature_moments([&](double y) { return p.quantile_right(detail::clamp01(y)); }, p.breakpoints(),
                                    t0, t1, degree, 0.0, 1.0, opts);
}

// Affine value map y = offset + scale * v used to bring constraint values
// into [-1, 1] before solving.
struct ValueScaling {
  double offset = 0.0;
  double scale = 1.0;

  double to_scaled(double y) const { return (y - offset) / scale; }
  double from_scaled(double v) const { return offset + scale * v; }
};

// One polynomial sub-problem on [t0, t1]. The optimization is carried out
// in the local coordinate u = (2x - t0 - t1) / (t1 - t0) in [-1, 1] on
// scaled values, so `moments` and `targets` are the Lebesgue moment matrix on
// [-1, 1] and the local moments int u^i F~(x(u)) du of the scaled gqf F~.
struct SegmentProblem {
  double t0;
  double t1;
  double z0;
  double z1;
  int degree;
  ValueScaling scaling;
  Eigen::MatrixXd moments;
  Eigen::VectorXd targets;

  double center() const { return 0.5 * (t0 + t1); }
  double half_width() const { return 0.5 * (t1 - t0); }
};

inline SegmentProblem make_segment_problem(const UnivariateMeasure& p, double t0, double t1, double z0, double z1,
                                           int degree, ValueScaling scaling = {},
                                           const QuadratureOptions& opts = {}) {
  detail::check_segment(t0, t1, degree, "make_segment_problem");
  SegmentProblem prob{t0, t1, z0, z1, degree, scaling, detail::lebesgue_moments(-1.0, 1.0, degree), {}};
  const double c = prob.center();
  const double h = prob.half_width();
  if (const auto st = p.steps()) {
    prob.targets = detail::step_moments(*st, t0, t1, degree, c, h);
  } else {
    prob.targets = detail::quadrature_moments([&](double y) { return p.quantile_right(detail::clamp01(y)); },
                                              p.breakpoints(), t0, t1, degree, c, h, opts);
  }
  // Scaled target: (F - offset) / scale, and int u^i du on [-1, 1].
  const Eigen::VectorXd ones = prob.moments.col(0);
  prob.targets = (prob.targets - scaling.offset * ones) / scaling.scale;
  return prob;
}

enum class StartPoint { identity, random };

struct SegmentOptions {
  BarrierOptions barrier{};
  StartPoint start = StartPoint::identity;
  Seed start_seed = 0;
};

// Solution of a segment problem: coefficients of the scaled polynomial in the
// local coordinate, plus solver diagnostics.
struct SegmentFit {
  double t0;
  double t1;
  int degree;
  ValueScaling scaling;
  Eigen::VectorXd local;  // S~(u) = sum_k local[k] u^k
  SolverReport report;
  double objective;  // s^T M s - 2 s^T r in the local scaled frame

  double value(double x) const {
    const double u = (2.0 * x - t0 - t1) / (t1 - t0);
    double acc = 0.0;
    for (int k = degree; k >= 0; --k) acc = acc * u + local[k];
    return scaling.from_scaled(acc);
  }

  double derivative(double x) const {
    const double u = (2.0 * x - t0 - t1) / (t1 - t0);
    double acc = 0.0;
    for (int k = degree; k >= 1; --k) acc = acc * u + k * local[k];
    return scaling.scale * acc * 2.0 / (t1 - t0);
  }

  // Coefficients in the monomial basis of x, original units.
  Eigen::VectorXd monomial() const {
    const double c = 0.5 * (t0 + t1);
    const double h = 0.5 * (t1 - t0);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(degree + 1);
    // u^k = ((x - c) / h)^k expanded binomially.
    for (int k = 0; k <= degree; ++k) {
      const double coef = local[k] / std::pow(h, k);
      double binom = 1.0;
      for (int j = 0; j <= k; ++j) {
        out[j] += coef * binom * std::pow(-c, k - j);
        binom = binom * (k - j) / (j + 1);
      }
    }
    out *= scaling.scale;
    out[0] += scaling.offset;
    return out;
  }
};

namespace detail {

inline Eigen::VectorXd random_gram_start(const std::vector<int>& sides, Seed seed) {
  Rng rng(seed);
  NormalSource normal;
  Eigen::VectorXd x(std::accumulate(sides.begin(), sides.end(), 0,
                                    [](int acc, int s) { return acc + sos::svec_size(s); }));
  int offset = 0;
  for (int s : sides) {
    Eigen::MatrixXd b(s, s);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) b(i, j) = normal(rng);
    }
    const Eigen::MatrixXd m = b * b.transpose() / s + 0.1 * Eigen::MatrixXd::Identity(s, s);
    x.segment(offset, sos::svec_size(s)) = sos::svec(m);
    offset += sos::svec_size(s);
  }
  return x;
}

}  // namespace detail

// Minimizes int (S - F)^2 over degree-d polynomials with S(t0) = z0,
// S(t1) = z1 and S' >= 0 on [t0, t1]. Nonnegativity of S' is certified by
// PSD Gram matrices (G_Z, G_W); s_0 is eliminated through S(t0) = z0, which
// leaves a single linear equality on the Gram variables.
inline SegmentFit fit_segment(const SegmentProblem& prob, const SegmentOptions& opts = {}) {
  const int d = prob.degree;
  if (d < 1) throw DomainError("fit_segment: degree must be at least 1");
  const double z0 = prob.scaling.to_scaled(prob.z0);
  const double z1 = prob.scaling.to_scaled(prob.z1);
  const double delta = z1 - z0;
  if (!(prob.z0 <= prob.z1) || delta < 0.0) {
    throw InfeasibleError("fit_segment: endpoint values decrease (z0 = " + detail::fmt_double(prob.z0) +
                          ", z1 = " + detail::fmt_double(prob.z1) + ")");
  }

  SegmentFit fit{prob.t0, prob.t1, d, prob.scaling, Eigen::VectorXd::Zero(d + 1), {}, 0.0};
  const Eigen::MatrixXd& m = prob.moments;
  const Eigen::VectorXd& r = prob.targets;
  if (delta == 0.0) {
    fit.local[0] = z0;
    fit.report.converged = true;
    fit.objective = fit.local.dot(m * fit.local) - 2.0 * fit.local.dot(r);
    return fit;
  }

  const auto shape = sos::certificate_shape(d);
  const Eigen::MatrixXd k = sos::certificate_to_coefficients(d, -1.0, 1.0);
  Eigen::VectorXd tau0(d), tau1(d);
  for (int i = 1; i <= d; ++i) {
    tau0[i - 1] = i % 2 == 0 ? 1.0 : -1.0;
    tau1[i - 1] = 1.0;
  }
  // s = e0 z0 + L g with L = [-tau0^T K; K].
  const int n = static_cast<int>(k.cols());
  Eigen::MatrixXd lift(d + 1, n);
  lift.row(0) = -(tau0.transpose() * k);
  lift.bottomRows(d) = k;
  Eigen::VectorXd base = Eigen::VectorXd::Zero(d + 1);
  base[0] = z0;

  ConicQp qp;
  qp.block_sides = {shape.z_side};
  if (shape.w_side > 0) qp.block_sides.push_back(shape.w_side);
  qp.P = 2.0 * lift.transpose() * m * lift;
  qp.P = 0.5 * (qp.P + qp.P.transpose());
  qp.q = -2.0 * lift.transpose() * (r - m * base);
  qp.A = ((tau1 - tau0).transpose() * k);
  qp.b = Eigen::VectorXd::Constant(1, delta);

  Eigen::VectorXd x0;
  if (opts.start == StartPoint::random) {
    x0 = detail::random_gram_start(qp.block_sides, opts.start_seed);
  } else {
    x0 = Eigen::VectorXd::Zero(n);
    int offset = 0;
    for (int s : qp.block_sides) {
      x0.segment(offset, sos::svec_size(s)) = sos::svec(Eigen::MatrixXd::Identity(s, s));
      offset += sos::svec_size(s);
    }
  }
  const double reach = qp.A.row(0).dot(x0);
  if (!(reach > 0.0)) throw SolverError("fit_segment: starting certificate has no increase");
  x0 *= delta / reach;

  Eigen::VectorXd g = solve_conic_qp(qp, x0, fit.report, opts.barrier);
  // Remove the residual of the single equality by rescaling; the cone is
  // invariant under positive scaling.
  const double reached = qp.A.row(0).dot(g);
  if (reached > 0.0) g *= delta / reached;
  fit.local = base + lift * g;
  fit.objective = fit.local.dot(m * fit.local) - 2.0 * fit.local.dot(r);
  return fit;
}

// Continuous piecewise-polynomial gqf on knots 0 = a_0 < ... < a_m = 1.
class SmoothGqf {
 public:
  SmoothGqf(std::vector<double> knots, std::vector<SegmentFit> segments)
      : knots_(std::move(knots)), segments_(std::move(segments)) {
    if (knots_.size() < 2 || segments_.size() + 1 != knots_.size()) {
      throw ShapeError("SmoothGqf: need one segment per pair of consecutive knots");
    }
  }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<SegmentFit>& segments() const noexcept { return segments_; }
  int degree() const { return segments_.front().degree; }
  const ValueScaling& scaling() const { return segments_.front().scaling; }

  std::size_t segment_index(double y) const {
    auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, y);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  double operator()(double y) const {
    y = detail::clamp01(y);
    return segments_[segment_index(y)].value(y);
  }

  double derivative(double y) const {
    y = detail::clamp01(y);
    return segments_[segment_index(y)].derivative(y);
  }

  // Largest level y with G(y) <= t; equals the cdf of the induced measure.
  double level_of(double t) const {
    if (t < (*this)(0.0)) return 0.0;
    if (t >= (*this)(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((*this)(mid) <= t) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

 private:
  std::vector<double> knots_;
  std::vector<SegmentFit> segments_;
};

class SmoothGqfModel final : public MeasureModel {
 public:
  explicit SmoothGqfModel(SmoothGqf gqf) : gqf_(std::move(gqf)) {}
  MeasureKind kind() const override { return MeasureKind::smooth_gqf; }
  double cdf(double t) const override { return gqf_.level_of(t); }
  double quantile_left(double a) const override { return gqf_(a); }
  double quantile_right(double a) const override { return gqf_(a); }
  Support support() const override { return {gqf_(0.0), gqf_(1.0)}; }
  std::string describe() const override {
    return "smooth-gqf(degree=" + std::to_string(gqf_.degree()) + ", segments=" +
           std::to_string(gqf_.segments().size()) + ")";
  }
  std::vector<double> breakpoints() const override {
    return {gqf_.knots().begin() + 1, gqf_.knots().end() - 1};
  }
  const SmoothGqf& gqf() const noexcept { return gqf_; }

 private:
  SmoothGqf gqf_;
};

inline UnivariateMeasure as_measure(SmoothGqf gqf) {
  return UnivariateMeasure(std::make_shared<SmoothGqfModel>(std::move(gqf)));
}

struct SmoothOptions {
  bool prescale = true;
  unsigned threads = 0;
  SegmentOptions segment{};
  QuadratureOptions quadrature{};
};

namespace detail {

template <class E>
[[noreturn]] void rethrow_for_segment(const E& e, std::size_t index) {
  throw E("segment " + std::to_string(index) + ": " + e.what());
}

}  // namespace detail

// Smooth projection: one monotone polynomial per pair of consecutive
// constraints, interpolating both ends. Requires constraints at levels 0 and 1.
inline SmoothGqf fit_smooth(const UnivariateMeasure& p, const ConstraintList& constraints, int degree,
                            const SmoothOptions& opts = {}) {
  if (degree < 1) throw ConfigError("fit_smooth: degree must be at least 1, got " + std::to_string(degree));
  const ConstraintList sorted = validate_class(constraints);
  if (sorted.front().alpha != 0.0 || sorted.back().alpha != 1.0) {
    throw ConfigError("fit_smooth: constraints at levels 0 and 1 are required to bound the support");
  }
  ValueScaling scaling;
  if (opts.prescale) {
    scaling.offset = 0.5 * (sorted.front().b + sorted.back().b);
    scaling.scale = 0.5 * (sorted.back().b - sorted.front().b);
  }

  const std::size_t count = sorted.size() - 1;
  std::vector<std::optional<SegmentFit>> fits(count);
  parallel_for(count, opts.threads, [&](std::size_t i) {
    try {
      const auto prob = make_segment_problem(p, sorted[i].alpha, sorted[i + 1].alpha, sorted[i].b,
                                             sorted[i + 1].b, degree, scaling, opts.quadrature);
      fits[i] = fit_segment(prob, opts.segment);
    } catch (const InfeasibleError& e) {
      detail::rethrow_for_segment(e, i);
    } catch (const SolverError& e) {
      detail::rethrow_for_segment(e, i);
    } catch (const QuadratureError& e) {
      detail::rethrow_for_segment(e, i);
    }
  });

  std::vector<double> knots;
  std::vector<SegmentFit> segments;
  for (const auto& c : sorted) knots.push_back(c.alpha);
  for (auto& f : fits) segments.push_back(std::move(*f));
  return SmoothGqf(std::move(knots), std::move(segments));
}

// int_0^1 (G - F^->_P)^2, by quadrature split at knots and base breakpoints.
inline double l2_squared_to_base(const SmoothGqf& g, const UnivariateMeasure& p, const QuadratureOptions& opts = {}) {
  std::vector<double> cuts = p.breakpoints();
  cuts.insert(cuts.end(), g.knots().begin(), g.knots().end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  QuadratureOptions local = opts;
  local.max_intervals = std::max(opts.max_intervals, 4 * cuts.size());
  return integrate<double>(
      [&](double y) {
        const double diff = g(y) - p.quantile_right(detail::clamp01(y));
        return diff * diff;
      },
      0.0, 1.0, cuts, local);
}

}  // namespace qcwass
