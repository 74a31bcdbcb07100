#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"
#include "qcwass/sos.hpp"

namespace qcwass {

// Small dense conic QP over a product of PSD cones:
//
//   minimize    1/2 x^T P x + q^T x
//   subject to  A x = b,   smat(x_k) PSD for every block k,
//
// with x the concatenation of svec-coordinates of the blocks.
struct ConicQp {
  std::vector<int> block_sides;
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  int dimension() const {
    return std::accumulate(block_sides.begin(), block_sides.end(), 0,
                           [](int acc, int side) { return acc + sos::svec_size(side); });
  }
  int barrier_degree() const { return std::accumulate(block_sides.begin(), block_sides.end(), 0); }
};

struct BarrierOptions {
  double gap_tolerance = 1e-10;
  double initial_t = 1.0;
  double t_growth = 8.0;
  // Half the squared Newton decrement below which a centering step stops.
  double centering_tolerance = 1e-8;
  int max_centering_steps = 100;
  int max_newton_steps = 2000;
};

struct SolverReport {
  int newton_steps = 0;
  int outer_iterations = 0;
  double duality_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double min_eigenvalue = 0.0;
  bool converged = false;
};

namespace detail {

struct BlockView {
  int offset;
  int side;
};

inline std::vector<BlockView> block_layout(const std::vector<int>& sides) {
  std::vector<BlockView> out;
  int offset = 0;
  for (int s : sides) {
    out.push_back({offset, s});
    offset += sos::svec_size(s);
  }
  return out;
}

// log det of every block, or nullopt when some block is not positive definite.
inline bool blocks_logdet(const std::vector<BlockView>& layout, const Eigen::VectorXd& x, double& logdet) {
  logdet = 0.0;
  for (const auto& blk : layout) {
    if (blk.side == 0) continue;
    const Eigen::MatrixXd m = sos::smat(x.segment(blk.offset, sos::svec_size(blk.side)), blk.side);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    for (int i = 0; i < diag.size(); ++i) {
      if (!(diag[i] > 0.0)) return false;
      logdet += 2.0 * std::log(diag[i]);
    }
  }
  return true;
}

}  // namespace detail

namespace detail {

struct NewtonStep {
  Eigen::VectorXd dx;
  Eigen::VectorXd grad;
  double decrement;
  double residual;
};

// Equality-constrained Newton step for t (1/2 x'Px + q'x) - sum log det X_k.
inline NewtonStep newton_step(const ConicQp& prob, const std::vector<BlockView>& layout, const Eigen::VectorXd& x,
                              double t) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(prob.A.rows());
  Eigen::VectorXd grad = t * (prob.P * x + prob.q);
  Eigen::MatrixXd hess = t * prob.P;
  for (const auto& blk : layout) {
    if (blk.side == 0) continue;
    const int len = sos::svec_size(blk.side);
    const Eigen::MatrixXd xm = sos::smat(x.segment(blk.offset, len), blk.side);
    const Eigen::MatrixXd inv = xm.llt().solve(Eigen::MatrixXd::Identity(blk.side, blk.side));
    grad.segment(blk.offset, len) -= sos::svec(inv);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(len);
    for (int l = 0; l < len; ++l) {
      unit.setZero();
      unit[l] = 1.0;
      const Eigen::MatrixXd e = sos::smat(unit, blk.side);
      hess.block(blk.offset, blk.offset + l, len, 1) += sos::svec(inv * e * inv);
    }
  }
  hess = 0.5 * (hess + hess.transpose());

  // Symmetric diagonal equilibration: near the boundary the barrier Hessian
  // spans many orders of magnitude.
  const Eigen::VectorXd scale =
      hess.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = scale.asDiagonal() * hess * scale.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    scaled.diagonal().array() += 1e-13;
    ldlt.compute(scaled);
  }
  if (ldlt.info() != Eigen::Success) throw SolverError("solve_conic_qp: Newton system factorization failed");
  auto solve = [&](const auto& rhs) -> Eigen::MatrixXd {
    return scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * rhs);
  };

  const Eigen::VectorXd residual = prob.A * x - prob.b;
  NewtonStep out{Eigen::VectorXd::Zero(n), grad, 0.0, m > 0 ? residual.norm() : 0.0};
  // KKT system [H A'; A 0] (dx, w) = (-grad, -residual) through the Schur
  // complement, with two rounds of iterative refinement against the
  // unregularized Hessian.
  Eigen::MatrixXd hinv_at;
  Eigen::LDLT<Eigen::MatrixXd> schur;
  if (m > 0) {
    hinv_at = solve(prob.A.transpose());
    schur.compute(prob.A * hinv_at);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd rg = -grad;
  Eigen::VectorXd rr = -residual;
  for (int round = 0; round < 3; ++round) {
    Eigen::VectorXd ddx;
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd hinv_rg = solve(rg);
    if (m > 0) {
      dw = schur.solve(prob.A * hinv_rg - rr);
      ddx = hinv_rg - hinv_at * dw;
    } else {
      ddx = hinv_rg;
    }
    out.dx += ddx;
    w += dw;
    rg = -grad - hess * out.dx;
    if (m > 0) {
      rg -= prob.A.transpose() * w;
      rr = -residual - prob.A * out.dx;
    }
  }
  out.decrement = out.dx.dot(hess * out.dx);
  if (!std::isfinite(out.decrement)) throw SolverError("solve_conic_qp: non-finite Newton decrement");
  return out;
}

}  // namespace detail

// Primal log-det barrier method with equality-constrained Newton centering.
// `x` must be strictly feasible on entry (every block positive definite);
// equality residuals are corrected by the Newton steps. The dual is read off
// a final full Newton step: for a quadratic objective the linearized
// stationarity is exact, so Z = (X^{-1} - X^{-1} dX X^{-1}) / t satisfies it at
// x + dx and is PSD whenever the step stays in the cone.
inline Eigen::VectorXd solve_conic_qp(const ConicQp& prob, Eigen::VectorXd x, SolverReport& report,
                                      const BarrierOptions& opts = {}) {
  const int n = prob.dimension();
  const int m = static_cast<int>(prob.A.rows());
  if (x.size() != n || prob.P.rows() != n || prob.q.size() != n || prob.A.cols() != n || prob.b.size() != m) {
    throw ShapeError("solve_conic_qp: inconsistent problem dimensions");
  }
  const auto layout = detail::block_layout(prob.block_sides);
  double logdet = 0.0;
  if (!detail::blocks_logdet(layout, x, logdet)) {
    throw SolverError("solve_conic_qp: starting point is not strictly feasible");
  }

  const double nu = prob.barrier_degree();
  const double feasible_tol = 1e-14 * (1.0 + prob.b.norm());
  double t = opts.initial_t;
  report = {};

  while (true) {
    for (int step = 0; step < opts.max_centering_steps && report.newton_steps < opts.max_newton_steps; ++step) {
      const auto nt = detail::newton_step(prob, layout, x, t);
      ++report.newton_steps;
      const Eigen::VectorXd& dx = nt.dx;
      if (0.5 * nt.decrement <= opts.centering_tolerance && nt.residual <= feasible_tol) break;

      // Backtracking: stay inside the cone, then require sufficient decrease of
      // the barrier objective measured as a difference.
      double s = 1.0;
      double new_logdet = 0.0;
      int halvings = 0;
      while (!detail::blocks_logdet(layout, x + s * dx, new_logdet)) {
        s *= 0.5;
        if (++halvings > 80) throw SolverError("solve_conic_qp: line search cannot stay in the cone");
      }
      if (nt.residual <= feasible_tol) {
        const Eigen::VectorXd px_q = prob.P * x + prob.q;
        const double slope = nt.grad.dot(dx);
        while (true) {
          const double change =
              t * (px_q.dot(s * dx) + 0.5 * s * s * dx.dot(prob.P * dx)) - (new_logdet - logdet);
          if (change <= 0.25 * s * slope || s < 1e-14) break;
          s *= 0.5;
          detail::blocks_logdet(layout, x + s * dx, new_logdet);
        }
      }
      x += s * dx;
      detail::blocks_logdet(layout, x, logdet);
      if (s < 1e-14) break;
    }

    ++report.outer_iterations;
    if (nu / t <= opts.gap_tolerance) {
      report.converged = true;
      break;
    }
    if (report.newton_steps >= opts.max_newton_steps) break;
    t *= opts.t_growth;
  }
  if (!report.converged) {
    std::ostringstream msg;
    msg << "solve_conic_qp: no convergence within " << opts.max_newton_steps << " Newton steps (barrier gap "
        << nu / t << ")";
    throw SolverError(msg.str());
  }

  const auto last = detail::newton_step(prob, layout, x, t);
  double unused = 0.0;
  if (detail::blocks_logdet(layout, x + last.dx, unused)) x += last.dx;
  Eigen::VectorXd z_dual = Eigen::VectorXd::Zero(n);
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  report.dual_residual = 0.0;
  for (const auto& blk : layout) {
    if (blk.side == 0) continue;
    const int len = sos::svec_size(blk.side);
    const Eigen::MatrixXd xm = sos::smat(x.segment(blk.offset, len), blk.side);
    report.min_eigenvalue =
        std::min(report.min_eigenvalue, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(xm).eigenvalues().minCoeff());
    const Eigen::MatrixXd xbefore = sos::smat((x - last.dx).segment(blk.offset, len), blk.side);
    const Eigen::MatrixXd inv = xbefore.llt().solve(Eigen::MatrixXd::Identity(blk.side, blk.side));
    const Eigen::MatrixXd dm = sos::smat(last.dx.segment(blk.offset, len), blk.side);
    const Eigen::MatrixXd zm = (inv - inv * dm * inv) / t;
    z_dual.segment(blk.offset, len) = sos::svec(zm);
    report.dual_residual = std::max(report.dual_residual,
                                    -Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(zm).eigenvalues().minCoeff());
  }
  if (!std::isfinite(report.min_eigenvalue)) report.min_eigenvalue = 0.0;
  Eigen::VectorXd stationarity = prob.P * x + prob.q - z_dual;
  if (m > 0) {
    const Eigen::VectorXd mult = prob.A.transpose().colPivHouseholderQr().solve(-stationarity);
    stationarity += prob.A.transpose() * mult;
  }
  report.dual_residual = std::max(report.dual_residual, stationarity.lpNorm<Eigen::Infinity>());
  report.duality_gap = std::abs(x.dot(z_dual));
  report.primal_residual = m > 0 ? (prob.A * x - prob.b).lpNorm<Eigen::Infinity>() : 0.0;
  return x;
}

}  // namespace qcwass
