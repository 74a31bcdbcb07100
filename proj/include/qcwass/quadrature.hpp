#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"

namespace qcwass {

struct QuadratureOptions {
  double relative_tolerance = 1e-10;
  double absolute_tolerance = 1e-15;
  std::size_t max_intervals = 20000;
};

namespace detail {

inline constexpr int kGaussOrder = 10;

struct GaussRule {
  std::array<double, kGaussOrder> nodes{};
  std::array<double, kGaussOrder> weights{};
};

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
inline const GaussRule& gauss_rule() {
  static const GaussRule rule = [] {
    GaussRule r;
    constexpr int n = kGaussOrder;
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.nodes[i] = x;
      r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

template <class Value>
Value zero_like(const Value& v) {
  if constexpr (std::is_same_v<Value, double>) {
    return 0.0;
  } else {
    return Value::Zero(v.size());
  }
}

template <class Value, class F>
Value gauss_panel(const F& f, double a, double b) {
  const auto& rule = gauss_rule();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Value acc = f(mid + half * rule.nodes[0]) * rule.weights[0];
  for (int i = 1; i < kGaussOrder; ++i) acc += f(mid + half * rule.nodes[i]) * rule.weights[i];
  return acc * half;
}

}  // namespace detail

// Globally adaptive composite Gauss-Legendre quadrature. The initial partition
// is [a, b] split at every breakpoint in `hints` that falls strictly inside;
// panels with the largest error estimate are bisected until the summed error
// meets max(rtol * |I|, atol). Value is double or Eigen::VectorXd (the
// error norm is the max-abs component).
template <class Value, class F>
Value integrate(const F& f, double a, double b, std::span<const double> hints = {},
                const QuadratureOptions& opts = {}) {
  if (!(a < b)) {
    if (a == b) return detail::zero_like<Value>(f(a));
    throw DomainError("integrate: lower bound exceeds upper bound");
  }

  struct Panel {
    double lo, hi;
    Value value;
    double error;
  };
  auto evaluate = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    Value whole = detail::gauss_panel<Value>(f, lo, hi);
    Value halves = detail::gauss_panel<Value>(f, lo, mid);
    halves += detail::gauss_panel<Value>(f, mid, hi);
    const double err = detail::magnitude(Value(whole - halves));
    return Panel{lo, hi, std::move(halves), err};
  };

  std::vector<double> cuts;
  cuts.reserve(hints.size() + 2);
  cuts.push_back(a);
  for (double h : hints) {
    if (h > a && h < b) cuts.push_back(h);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto cmp = [](const Panel& x, const Panel& y) { return x.error < y.error; };
  std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> queue(cmp);
  Value total = detail::zero_like<Value>(f(0.5 * (a + b)));
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Panel p = evaluate(cuts[i], cuts[i + 1]);
    total += p.value;
    total_error += p.error;
    queue.push(std::move(p));
  }

  const std::size_t budget = opts.max_intervals + cuts.size();
  while (total_error > std::max(opts.relative_tolerance * detail::magnitude(total),
                                opts.absolute_tolerance)) {
    if (queue.size() >= budget) {
      throw QuadratureError("integrate: subdivision budget of " + std::to_string(budget) +
                            " panels exhausted (error " + std::to_string(total_error) + ")");
    }
    Panel worst = queue.top();
    if (worst.error <= 0.0) break;
    queue.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      // Panel width at machine resolution; keep its estimate.
      total_error -= worst.error;
      worst.error = 0.0;
      queue.push(std::move(worst));
      continue;
    }
    Panel left = evaluate(worst.lo, mid);
    Panel right = evaluate(mid, worst.hi);
    total -= worst.value;
    total += left.value;
    total += right.value;
    total_error += left.error + right.error - worst.error;
    queue.push(std::move(left));
    queue.push(std::move(right));
  }
  return total;
}

}  // namespace qcwass
