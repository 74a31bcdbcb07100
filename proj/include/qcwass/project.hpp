#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "qcwass/measures.hpp"
#include "qcwass/perturb.hpp"
#include "qcwass/quadrature.hpp"

namespace qcwass {

// One clamped interval A_i = (lower, upper] of quantile levels on which the
// projected gqf is constant and equal to the constraint value.
struct ClampedSegment {
  double alpha;
  double value;
  double lower;  // c_i
  double upper;  // d_i

  bool degenerate() const noexcept { return !(upper > lower); }
  double mass() const noexcept { return std::max(0.0, upper - lower); }
};

struct Atom {
  double location;
  double mass;
};

// Open interval of values receiving no mass under the projection.
struct ValueGap {
  double lower;
  double upper;
};

// Exact quantile-constrained W2 projection of a base measure: the base gqf
// outside the clamped intervals, the constraint values on them.
class PiecewiseGqf {
 public:
  PiecewiseGqf(UnivariateMeasure base, ConstraintList constraints, std::vector<ClampedSegment> segments)
      : base_(std::move(base)), constraints_(std::move(constraints)), segments_(std::move(segments)) {}

  const UnivariateMeasure& base() const noexcept { return base_; }
  const ConstraintList& constraints() const noexcept { return constraints_; }
  const std::vector<ClampedSegment>& segments() const noexcept { return segments_; }

  // True when every clamped interval is empty, i.e. the base already
  // satisfies all constraints.
  bool is_identity() const noexcept {
    return std::all_of(segments_.begin(), segments_.end(), [](const auto& s) { return s.degenerate(); });
  }

  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    for (const auto& s : segments_) {
      if (!s.degenerate()) out.push_back({s.value, s.mass()});
    }
    return out;
  }

  // Value gaps I_i created by the clamping, with b_0 = -inf, b_{K+1} = +inf.
  std::vector<ValueGap> zero_mass_intervals() const {
    std::vector<ValueGap> out;
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t k = constraints_.size();
    for (std::size_t i = 0; i < k; ++i) {
      const double b = constraints_[i].b;
      const double p = base_.quantile_left(constraints_[i].alpha);
      if (b > p) {
        const double prev = i > 0 ? constraints_[i - 1].b : -inf;
        out.push_back({std::max(p, prev), b});
      } else if (b < p) {
        const double next = i + 1 < k ? constraints_[i + 1].b : inf;
        out.push_back({b, std::min(next, p)});
      }
    }
    return out;
  }

  // Measure of the levels left untouched, [0,1] minus the union of A_i.
  double untouched_mass() const {
    double m = 1.0;
    for (const auto& s : segments_) m -= s.mass();
    return m;
  }

  // Left-continuous gqf; levels 0 and 1 return a pinned constraint value when
  // an extremal constraint is present.
  double quantile_left(double y) const {
    if (y <= 0.0) return quantile_right(0.0);
    for (const auto& s : segments_) {
      if (y > s.lower && y <= s.upper) return s.value;
    }
    if (y >= 1.0 && !constraints_.empty() && constraints_.back().alpha == 1.0) return constraints_.back().b;
    double v = base_.quantile_left(y);
    // Outside every clamped interval the base gqf already lies on the correct
    // side of each b_i; enforce it against roundoff in the base inversion.
    for (const auto& s : segments_) {
      if (y <= s.lower) v = std::min(v, s.value);
      if (y > s.upper) v = std::max(v, s.value);
    }
    return v;
  }

  double quantile_right(double y) const {
    if (y >= 1.0) return quantile_left(1.0);
    for (const auto& s : segments_) {
      if (y >= s.lower && y < s.upper) return s.value;
    }
    if (y <= 0.0 && !constraints_.empty() && constraints_.front().alpha == 0.0) return constraints_.front().b;
    double v = base_.quantile_right(y);
    for (const auto& s : segments_) {
      if (y < s.lower) v = std::min(v, s.value);
      if (y >= s.upper) v = std::max(v, s.value);
    }
    return v;
  }

  double cdf(double t) const {
    const double base_level = base_.cdf(t);
    double f = base_level;
    for (const auto& s : segments_) {
      // Remove clamped levels below base_level, then add back the atom mass.
      const double overlap = std::max(0.0, std::min(s.upper, base_level) - s.lower);
      f -= overlap;
      if (s.value <= t) f += s.mass();
    }
    return detail::clamp01(f);
  }

  std::vector<double> breakpoints() const {
    std::vector<double> out = base_.breakpoints();
    for (const auto& s : segments_) {
      out.push_back(s.lower);
      out.push_back(s.upper);
    }
    std::erase_if(out, [](double v) { return !(v > 0.0 && v < 1.0); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Finite step representation, available when the base gqf is a step
  // function (e.g. an empirical measure).
  std::optional<StepGqf> steps() const {
    auto base_steps = base_.steps();
    if (!base_steps) return std::nullopt;
    std::vector<double> levels = base_steps->levels;
    for (const auto& s : segments_) {
      levels.push_back(s.lower);
      levels.push_back(s.upper);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    StepGqf out;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
      const double lo = levels[k], hi = levels[k + 1];
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi);
      double v = std::numeric_limits<double>::quiet_NaN();
      for (const auto& s : segments_) {
        if (mid > s.lower && mid < s.upper) v = s.value;
      }
      if (std::isnan(v)) v = base_.quantile_right(mid);
      if (!out.values.empty() && out.values.back() == v) {
        out.levels.back() = hi;
      } else {
        if (out.levels.empty()) out.levels.push_back(lo);
        out.levels.push_back(hi);
        out.values.push_back(v);
      }
    }
    return out;
  }

  // Explicit finite discrete measure (atoms of the base outside the clamped
  // levels plus the constraint atoms), for step bases only.
  std::optional<std::vector<Atom>> discrete_atoms() const {
    auto st = steps();
    if (!st) return std::nullopt;
    std::vector<Atom> out;
    for (std::size_t k = 0; k < st->values.size(); ++k) {
      out.push_back({st->values[k], st->levels[k + 1] - st->levels[k]});
    }
    return out;
  }

 private:
  UnivariateMeasure base_;
  ConstraintList constraints_;
  std::vector<ClampedSegment> segments_;
};

class PiecewiseGqfModel final : public MeasureModel {
 public:
  explicit PiecewiseGqfModel(PiecewiseGqf gqf) : gqf_(std::move(gqf)) {}
  MeasureKind kind() const override { return MeasureKind::piecewise_gqf; }
  double cdf(double t) const override { return gqf_.cdf(t); }
  double quantile_left(double a) const override { return gqf_.quantile_left(a); }
  double quantile_right(double a) const override { return gqf_.quantile_right(a); }
  Support support() const override { return {gqf_.quantile_right(0.0), gqf_.quantile_left(1.0)}; }
  std::string describe() const override {
    return "piecewise-gqf(base=" + gqf_.base().describe() + ", K=" + std::to_string(gqf_.constraints().size()) +
           ")";
  }
  std::optional<StepGqf> steps() const override { return gqf_.steps(); }
  std::vector<double> breakpoints() const override { return gqf_.breakpoints(); }
  const PiecewiseGqf& gqf() const noexcept { return gqf_; }

 private:
  PiecewiseGqf gqf_;
};

inline UnivariateMeasure as_measure(PiecewiseGqf gqf) {
  return UnivariateMeasure(std::make_shared<PiecewiseGqfModel>(std::move(gqf)));
}

// Exact minimizer of W2(p, .) over measures satisfying every constraint.
// beta_i = F_p(b_i) uses the right-continuous cdf.
inline PiecewiseGqf project_exact(const UnivariateMeasure& p, const ConstraintList& constraints) {
  ConstraintList sorted = validate_class(constraints);
  const std::size_t k = sorted.size();
  std::vector<double> beta(k);
  for (std::size_t i = 0; i < k; ++i) beta[i] = p.cdf(sorted[i].b);

  std::vector<ClampedSegment> segments(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double a = sorted[i].alpha;
    // Already an admissible a-quantile of p: the clamped interval would only
    // repeat values p already has there, so it is stored empty.
    if (p.quantile_left(a) <= sorted[i].b && sorted[i].b <= p.quantile_right(a)) {
      segments[i] = {a, sorted[i].b, a, a};
      continue;
    }
    const double c = i == 0 ? std::min(beta[i], a) : std::min(std::max(sorted[i - 1].alpha, beta[i]), a);
    const double d = i + 1 == k ? std::max(beta[i], a) : std::max(std::min(beta[i], sorted[i + 1].alpha), a);
    segments[i] = {a, sorted[i].b, c, d};
  }
  return PiecewiseGqf(p, std::move(sorted), std::move(segments));
}

// sqrt of sum_i int_{A_i} (F^->_P - b_i)^2, the W2 distance between the base
// and its projection.
inline double w2_cost(const PiecewiseGqf& result, const QuadratureOptions& opts = {}) {
  const auto& base = result.base();
  double total = 0.0;
  const auto base_steps = base.steps();
  for (const auto& s : result.segments()) {
    if (s.degenerate()) continue;
    if (base_steps) {
      const auto& st = *base_steps;
      for (std::size_t j = 0; j < st.values.size(); ++j) {
        const double lo = std::max(s.lower, st.levels[j]);
        const double hi = std::min(s.upper, st.levels[j + 1]);
        if (hi > lo) {
          const double diff = st.values[j] - s.value;
          total += diff * diff * (hi - lo);
        }
      }
    } else {
      const auto hints = base.breakpoints();
      total += integrate<double>(
          [&](double y) {
            const double diff = base.quantile_right(y) - s.value;
            return diff * diff;
          },
          s.lower, s.upper, hints, opts);
    }
  }
  return std::sqrt(total);
}

}  // namespace qcwass
