#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qcwass/error.hpp"
#include "qcwass/measures.hpp"

namespace qcwass {

// Requirement that b be an admissible alpha-quantile of the perturbed law.
struct QuantileConstraint {
  double alpha;
  double b;

  friend bool operator==(const QuantileConstraint&, const QuantileConstraint&) = default;
};

using ConstraintList = std::vector<QuantileConstraint>;

namespace detail {

inline void check_theta(double theta, const char* who) {
  if (!(theta >= -1.0 && theta <= 1.0)) {
    throw DomainError(std::string(who) + ": theta " + fmt_double(theta) + " outside [-1, 1]");
  }
}

}  // namespace detail

// Target value of a quantile shift: piecewise affine from eta0 (theta = -1)
// through p_alpha (theta = 0) to eta1 (theta = 1).
inline double shift_target(double p_alpha, double eta0, double eta1, double theta) {
  if (!(eta0 < p_alpha && p_alpha < eta1)) {
    throw DomainError("shift_target: require eta0 < p_alpha < eta1");
  }
  detail::check_theta(theta, "shift_target");
  if (theta < 0.0) return p_alpha * (1.0 + theta) - theta * eta0;
  if (theta > 0.0) return p_alpha * (1.0 - theta) + theta * eta1;
  return p_alpha;
}

struct DomainBounds {
  double b0;
  double b1;
};

// Support endpoints after a midpoint-preserving dilatation of [omega0, omega1]:
// the width is divided by eta at theta = -1 and multiplied by eta at theta = 1.
inline DomainBounds dilatation_targets(double omega0, double omega1, double eta, double theta) {
  if (!(omega0 < omega1)) throw DomainError("dilatation_targets: require omega0 < omega1");
  if (!(eta > 1.0) || !std::isfinite(eta)) throw DomainError("dilatation_targets: require eta > 1");
  detail::check_theta(theta, "dilatation_targets");
  if (theta < 0.0) {
    const double k = 1.0 / eta - 1.0;
    return {0.5 * (omega0 * (2.0 - theta * k) + theta * omega1 * k),
            0.5 * (omega1 * (2.0 - theta * k) + theta * omega0 * k)};
  }
  if (theta > 0.0) {
    const double k = eta - 1.0;
    return {0.5 * (omega0 * (2.0 + theta * k) - theta * omega1 * k),
            0.5 * (omega1 * (2.0 + theta * k) - theta * omega0 * k)};
  }
  return {omega0, omega1};
}

// Sorts by alpha and checks strict increase of both alpha and b, the
// condition under which the perturbation class is non-empty.
inline ConstraintList validate_class(ConstraintList constraints) {
  if (constraints.empty()) throw EmptyClassError("validate_class: empty constraint list", 0, 0);
  for (const auto& c : constraints) {
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
      throw DomainError("validate_class: alpha " + detail::fmt_double(c.alpha) + " outside [0, 1]");
    }
    if (!std::isfinite(c.b)) throw DomainError("validate_class: non-finite target value");
  }
  std::stable_sort(constraints.begin(), constraints.end(),
                   [](const auto& x, const auto& y) { return x.alpha < y.alpha; });
  for (std::size_t i = 1; i < constraints.size(); ++i) {
    const auto& lo = constraints[i - 1];
    const auto& hi = constraints[i];
    if (!(lo.alpha < hi.alpha) || !(lo.b < hi.b)) {
      throw EmptyClassError("perturbation class may be empty: constraint (" + detail::fmt_double(lo.alpha) +
                                ", " + detail::fmt_double(lo.b) + ") and (" + detail::fmt_double(hi.alpha) +
                                ", " + detail::fmt_double(hi.b) + ") are not strictly increasing",
                            i - 1, i);
    }
  }
  return constraints;
}

struct ExplicitGenerator {
  ConstraintList constraints;
};

struct ShiftGenerator {
  double alpha;
  double p_alpha;
  double eta0;
  double eta1;
};

struct DilatationGenerator {
  double omega0;
  double omega1;
  double eta;
};

using Generator = std::variant<ExplicitGenerator, ShiftGenerator, DilatationGenerator>;

// theta-indexed family of constraint sets: a generator plus constraints held
// fixed at every intensity.
struct PerturbationScheme {
  Generator generator = ExplicitGenerator{};
  ConstraintList fixed;

  static PerturbationScheme shift(double alpha, double p_alpha, double eta0, double eta1,
                                  ConstraintList fixed = {}) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("shift scheme: alpha outside [0, 1]");
    if (!(eta0 < p_alpha && p_alpha < eta1)) throw DomainError("shift scheme: require eta0 < p_alpha < eta1");
    return {ShiftGenerator{alpha, p_alpha, eta0, eta1}, std::move(fixed)};
  }
  static PerturbationScheme dilatation(double omega0, double omega1, double eta, ConstraintList fixed = {}) {
    if (!(omega0 < omega1)) throw DomainError("dilatation scheme: require omega0 < omega1");
    if (!(eta > 1.0)) throw DomainError("dilatation scheme: require eta > 1");
    return {DilatationGenerator{omega0, omega1, eta}, std::move(fixed)};
  }
  static PerturbationScheme explicit_list(ConstraintList constraints, ConstraintList fixed = {}) {
    return {ExplicitGenerator{std::move(constraints)}, std::move(fixed)};
  }
};

// Constraints (alpha, F^<-_P(alpha)) freezing the listed quantiles of p.
inline ConstraintList preserve_quantiles(const UnivariateMeasure& p, const std::vector<double>& levels) {
  ConstraintList out;
  out.reserve(levels.size());
  for (double a : levels) out.push_back({a, p.quantile_left(a)});
  return out;
}

// Constraints (alpha, F^<-_P(alpha) + delta).
inline ConstraintList offset_quantiles(const UnivariateMeasure& p,
                                       const std::vector<std::pair<double, double>>& offsets) {
  ConstraintList out;
  out.reserve(offsets.size());
  for (const auto& [a, delta] : offsets) out.push_back({a, p.quantile_left(a) + delta});
  return out;
}

inline ConstraintList generate(const Generator& g, double theta) {
  detail::check_theta(theta, "materialize");
  return std::visit(
      [theta](const auto& gen) -> ConstraintList {
        using G = std::decay_t<decltype(gen)>;
        if constexpr (std::is_same_v<G, ExplicitGenerator>) {
          return gen.constraints;
        } else if constexpr (std::is_same_v<G, ShiftGenerator>) {
          return {{gen.alpha, shift_target(gen.p_alpha, gen.eta0, gen.eta1, theta)}};
        } else {
          const auto [b0, b1] = dilatation_targets(gen.omega0, gen.omega1, gen.eta, theta);
          return {{0.0, b0}, {1.0, b1}};
        }
      },
      g);
}

inline ConstraintList materialize(const PerturbationScheme& scheme, double theta) {
  ConstraintList all = generate(scheme.generator, theta);
  all.insert(all.end(), scheme.fixed.begin(), scheme.fixed.end());
  return validate_class(std::move(all));
}

// Default intensity grid: `points` equispaced values on [-1, 1].
inline std::vector<double> theta_grid(std::size_t points = 21) {
  if (points < 2) throw DomainError("theta_grid: need at least two points");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  grid.front() = -1.0;
  grid.back() = 1.0;
  // Snap the midpoint exactly to zero for odd point counts.
  if (points % 2 == 1) grid[points / 2] = 0.0;
  return grid;
}

}  // namespace qcwass
