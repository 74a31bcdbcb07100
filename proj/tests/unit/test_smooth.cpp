#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qcwass/conic_qp.hpp"
#include "qcwass/project.hpp"
#include "qcwass/smooth.hpp"
#include "qcwass/sos.hpp"

using namespace qcwass;

namespace {

double poly(const Eigen::VectorXd& c, double x) {
  double acc = 0.0;
  for (Eigen::Index k = c.size() - 1; k >= 0; --k) acc = acc * x + c[k];
  return acc;
}

Eigen::MatrixXd random_psd(int side, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd b(side, side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) b(i, j) = g(rng);
  }
  return b * b.transpose();
}

void expect_valid_smooth(const SmoothGqf& g, const ConstraintList& cons) {
  for (const auto& c : cons) EXPECT_NEAR(g(c.alpha), c.b, 1e-6) << "alpha " << c.alpha;
  const auto& knots = g.knots();
  for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
    EXPECT_NEAR(g.segments()[i - 1].value(knots[i]), g.segments()[i].value(knots[i]), 1e-7);
  }
  for (const auto& seg : g.segments()) {
    for (int k = 0; k <= 10000; ++k) {
      const double x = seg.t0 + (seg.t1 - seg.t0) * k / 10000.0;
      EXPECT_GE(seg.derivative(x), -1e-8) << "x " << x;
    }
  }
}

}  // namespace

TEST(Sos, GramCoefficientsAreAntiDiagonalSums) {
  Eigen::Matrix3d g;
  g << 1, 2, 3, 2, 5, 6, 3, 6, 9;
  const Eigen::VectorXd c = sos::gram_to_coefficients(g);
  EXPECT_EQ(c.size(), 5);
  EXPECT_DOUBLE_EQ(c[0], 1);
  EXPECT_DOUBLE_EQ(c[1], 4);
  EXPECT_DOUBLE_EQ(c[2], 11);
  EXPECT_DOUBLE_EQ(c[3], 12);
  EXPECT_DOUBLE_EQ(c[4], 9);
  EXPECT_TRUE((sos::gram_map(3) * sos::svec(g)).isApprox(c, 1e-14));
  EXPECT_TRUE(sos::smat(sos::svec(g), 3).isApprox(g, 1e-15));
}

TEST(Sos, DerivativeMapsReproduceTheCertificate) {
  std::mt19937_64 rng(3);
  for (int d = 1; d <= 12; ++d) {
    const double t0 = 0.2, t1 = 0.7;
    const auto shape = sos::certificate_shape(d);
    const Eigen::MatrixXd gz = random_psd(shape.z_side, rng);
    const Eigen::MatrixXd gw = shape.w_side > 0 ? random_psd(shape.w_side, rng) : Eigen::MatrixXd(0, 0);
    Eigen::VectorXd x(sos::svec_size(shape.z_side) + sos::svec_size(shape.w_side));
    x.head(sos::svec_size(shape.z_side)) = sos::svec(gz);
    if (shape.w_side > 0) x.tail(sos::svec_size(shape.w_side)) = sos::svec(gw);
    Eigen::VectorXd s(d + 1);
    s[0] = 0.0;
    s.tail(d) = sos::certificate_to_coefficients(d, t0, t1) * x;
    for (double v : {0.0, 0.2, 0.45, 0.7, 1.3}) {
      auto quad = [&](const Eigen::MatrixXd& g) {
        Eigen::VectorXd m(g.rows());
        for (Eigen::Index i = 0; i < g.rows(); ++i) m[i] = std::pow(v, static_cast<double>(i));
        return m.dot(g * m);
      };
      double expected;
      if (shape.odd) {
        expected = quad(gz) + (shape.w_side > 0 ? (v - t0) * (t1 - v) * quad(gw) : 0.0);
      } else {
        expected = (v - t0) * quad(gz) + (t1 - v) * quad(gw);
      }
      double deriv = 0.0;
      for (int k = 1; k <= d; ++k) deriv += k * s[k] * std::pow(v, k - 1);
      EXPECT_NEAR(deriv, expected, 1e-9 * (1.0 + std::abs(expected))) << "d=" << d << " x=" << v;
    }
  }
}

TEST(ConicQp, ProjectsOntoThePsdCone) {
  // min 1/2 ||X - C||_F^2 over X PSD: clip the negative eigenvalues of C.
  Eigen::Matrix3d c;
  c << 2, 1, 0, 1, -1, 0.5, 0, 0.5, 0.3;
  ConicQp qp;
  qp.block_sides = {3};
  qp.P = Eigen::MatrixXd::Identity(6, 6);
  qp.q = -sos::svec(c);
  qp.A = Eigen::MatrixXd(0, 6);
  qp.b = Eigen::VectorXd(0);
  SolverReport report;
  const Eigen::VectorXd x = solve_conic_qp(qp, sos::svec(Eigen::Matrix3d::Identity()), report);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c);
  const Eigen::Vector3d clipped = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix3d expected = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  EXPECT_TRUE(report.converged);
  EXPECT_LT((sos::smat(x, 3) - expected).norm(), 1e-6);
  EXPECT_GE(report.min_eigenvalue, -1e-8);
  EXPECT_LE(report.dual_residual, 1e-7);
}

TEST(MomentMatrix, HilbertMatricesOnTheUnitInterval) {
  Eigen::Matrix2d m1;
  m1 << 1, 0.5, 0.5, 1.0 / 3.0;
  EXPECT_TRUE(moment_matrix(0.0, 1.0, 1).isApprox(m1, 1e-15));
  Eigen::Matrix3d m2;
  m2 << 1, 1.0 / 2, 1.0 / 3, 1.0 / 2, 1.0 / 3, 1.0 / 4, 1.0 / 3, 1.0 / 4, 1.0 / 5;
  EXPECT_TRUE(moment_matrix(0.0, 1.0, 2).isApprox(m2, 1e-15));
}

TEST(MomentMatrix, PositiveDefiniteAndValidated) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double a = 0.5 * u(rng);
    const double b = a + 0.2 + 0.3 * u(rng);
    const auto m = moment_matrix(a, b, 1 + rep % 4);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(m).info(), Eigen::Success);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), 0.0);
    EXPECT_TRUE(m.isApprox(m.transpose()));
  }
  EXPECT_THROW(moment_matrix(0.5, 0.4, 2), DomainError);
  EXPECT_THROW(moment_matrix(-0.1, 0.4, 2), DomainError);
  EXPECT_THROW(moment_matrix(0.1, 0.4, 0), DomainError);
}

TEST(MomentVector, UniformAndSmallEmpiricals) {
  const Eigen::VectorXd r = moment_vector(UnivariateMeasure::uniform(0.0, 1.0), 0.0, 1.0, 1);
  EXPECT_NEAR(r[0], 0.5, 1e-14);
  EXPECT_NEAR(r[1], 1.0 / 3.0, 1e-14);
  const std::vector<double> two = {0.0, 1.0};
  EXPECT_NEAR(moment_vector(UnivariateMeasure::empirical(two), 0.0, 1.0, 1)[0],
              oracle::empirical_moment(two, 0.0, 1.0, 0), 1e-15);
  EXPECT_NEAR(oracle::empirical_moment(two, 0.0, 1.0, 0), 0.5, 1e-15);
  const std::vector<double> four = {1.0, 2.0, 3.0, 4.0};
  const Eigen::VectorXd r4 = moment_vector(UnivariateMeasure::empirical(four), 0.1, 0.9, 1);
  EXPECT_NEAR(r4[0], oracle::empirical_moment(four, 0.1, 0.9, 0), 1e-10);
  EXPECT_NEAR(r4[1], oracle::empirical_moment(four, 0.1, 0.9, 1), 1e-10);
}

TEST(MomentVector, ClosedFormMatchesQuadratureIncludingGridBoundaries) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(3, 200);
  std::normal_distribution<double> g(5.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = size(rng);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = g(rng);
    std::sort(x.begin(), x.end());
    double t0, t1;
    if (rep % 3 == 0) {
      std::uniform_int_distribution<int> k(0, n);
      int a = k(rng), b = k(rng);
      if (a == b) b = a == n ? a - 1 : a + 1;
      t0 = std::min(a, b) / static_cast<double>(n);
      t1 = std::max(a, b) / static_cast<double>(n);
    } else {
      t0 = u(rng);
      t1 = u(rng);
      if (t0 > t1) std::swap(t0, t1);
    }
    const Eigen::VectorXd r = moment_vector(UnivariateMeasure::empirical(x), t0, t1, 6);
    for (int i = 0; i <= 6; ++i) {
      EXPECT_NEAR(r[i], oracle::empirical_moment(x, t0, t1, i), 1e-9) << "n=" << n << " i=" << i;
    }
  }
}

TEST(MomentVector, PrintedIndexingFailsOnlyOnBoundaryCases) {
  // Literal reading of the published closed form: agrees for generic
  // intervals, double counts when t0 and t1 share a cell, and reads past the
  // last order statistic at t1 = 1.
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  EXPECT_NEAR(oracle::printed_appendix_moment(x, 0.1, 0.9, 0), oracle::empirical_moment(x, 0.1, 0.9, 0), 1e-14);
  EXPECT_GT(std::abs(oracle::printed_appendix_moment(x, 0.3, 0.4, 0) - oracle::empirical_moment(x, 0.3, 0.4, 0)),
            0.1);
  EXPECT_NEAR(moment_vector(UnivariateMeasure::empirical(x), 0.3, 0.4, 0 + 1)[0],
              oracle::empirical_moment(x, 0.3, 0.4, 0), 1e-15);
  EXPECT_NEAR(moment_vector(UnivariateMeasure::empirical(x), 0.5, 1.0, 1)[0], 0.5 * 3.5, 1e-15);
}

TEST(MomentVector, ContinuousByQuadrature) {
  const auto p = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  const Eigen::VectorXd r = moment_vector(p, 0.2, 0.9, 4);
  for (int i = 0; i <= 4; ++i) {
    const double ref = oracle::piecewise_gauss([&](double y) { return std::pow(y, i) * p.quantile_right(y); },
                                               {0.2, 0.9}, 20, 32);
    EXPECT_NEAR(r[i], ref, 1e-9 * std::abs(ref));
  }
}

TEST(FitSegment, FeasibleTargetIsReproduced) {
  const auto p = UnivariateMeasure::uniform(0.0, 1.0);
  const auto fit = fit_segment(make_segment_problem(p, 0.0, 1.0, 0.0, 1.0, 1));
  const Eigen::VectorXd s = fit.monomial();
  EXPECT_NEAR(s[0], 0.0, 1e-7);
  EXPECT_NEAR(s[1], 1.0, 1e-7);
  EXPECT_NEAR(fit.objective + 2.0 / 3.0, 0.0, 1e-9);  // int F^2 du on [-1, 1] is 2/3
}

TEST(FitSegment, EndpointForcedLine) {
  const auto p = UnivariateMeasure::uniform(0.0, 1.0);
  const auto fit = fit_segment(make_segment_problem(p, 0.0, 1.0, 0.0, 0.5, 1));
  const Eigen::VectorXd s = fit.monomial();
  EXPECT_NEAR(s[0], 0.0, 1e-9);
  EXPECT_NEAR(s[1], 0.5, 1e-9);
  const double resid =
      oracle::piecewise_gauss([&](double x) { return std::pow(poly(s, x) - x, 2); }, {0.0, 1.0});
  EXPECT_NEAR(resid, 0.25 / 3.0, 1e-9);
  const auto ref = oracle::grid_constrained_fit([](double x) { return x; }, {}, 0.0, 1.0, 0.0, 0.5, 1);
  EXPECT_NEAR(ref(0.0), s[0], 1e-5);
  EXPECT_NEAR(ref(1.0) - ref(0.0), s[1], 1e-5);
}

TEST(FitSegment, ConstantTarget) {
  const auto p = UnivariateMeasure::point_mass(3.0);
  for (int d : {1, 4, 9}) {
    const auto fit = fit_segment(make_segment_problem(p, 0.2, 0.6, 3.0, 3.0, d));
    const Eigen::VectorXd s = fit.monomial();
    EXPECT_NEAR(s[0], 3.0, 1e-12);
    for (int k = 1; k <= d; ++k) EXPECT_NEAR(s[k], 0.0, 1e-12);
  }
}

TEST(FitSegment, DecreasingEndpointsAreInfeasible) {
  const auto p = UnivariateMeasure::uniform(0.0, 1.0);
  EXPECT_THROW(fit_segment(make_segment_problem(p, 0.0, 1.0, 0.6, 0.5, 3)), InfeasibleError);
}

TEST(FitSegment, MatchesGridConstrainedOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const int d = 2 + rep % 7;
    std::vector<double> x(15 + rep);
    for (auto& v : x) v = 10.0 * u(rng);
    const auto p = UnivariateMeasure::empirical(x);
    double t0 = u(rng), t1 = u(rng);
    if (t0 > t1) std::swap(t0, t1);
    if (t1 - t0 < 0.1) t1 = std::min(1.0, t0 + 0.3);
    // Endpoint values away from the gqf so the monotonicity constraint binds.
    const double z0 = p.quantile_right(t0) + 0.5 * u(rng);
    const double z1 = std::max(z0, p.quantile_left(t1) - 0.5 * u(rng));
    const ValueScaling scaling{0.5 * (z0 + z1), std::max(0.5 * (z1 - z0), 1e-3)};
    const auto fit = fit_segment(make_segment_problem(p, t0, t1, z0, z1, d, scaling));
    EXPECT_LE(fit.report.primal_residual, 1e-7);
    EXPECT_LE(fit.report.dual_residual, 1e-7);
    EXPECT_GE(fit.report.min_eigenvalue, -1e-8);
    const auto breaks = p.breakpoints();
    const auto ref = oracle::grid_constrained_fit([&](double y) { return p.quantile_right(y); }, breaks, t0, t1,
                                                  z0, z1, d, 8000);
    std::vector<double> cuts = {t0, t1};
    const double l2 = std::sqrt(
        oracle::piecewise_gauss([&](double y) { return std::pow(fit.value(y) - ref(y), 2); }, cuts, 30, 4));
    EXPECT_LT(l2, 1e-4) << "case " << rep << " d=" << d;
    EXPECT_NEAR(fit.value(t0), z0, 1e-6);
    EXPECT_NEAR(fit.value(t1), z1, 1e-6);
  }
}

TEST(FitSmooth, ReproducesPolynomialGqf) {
  const auto p = UnivariateMeasure::uniform(0.0, 10.0);
  const ConstraintList cons = {{0.0, 0.0}, {0.5, 5.0}, {1.0, 10.0}};
  const auto g = fit_smooth(p, cons, 3);
  for (int k = 0; k <= 100; ++k) EXPECT_NEAR(g(k / 100.0), 10.0 * k / 100.0, 1e-6);
  EXPECT_LT(l2_squared_to_base(g, p), 1e-12);
  expect_valid_smooth(g, cons);
}

TEST(FitSmooth, DilatedKsDomain) {
  const auto p = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  const auto cons = materialize(PerturbationScheme::dilatation(20.0, 50.0, 2.0), 1.0);
  const auto g = fit_smooth(p, cons, 12);
  EXPECT_NEAR(g(0.0), 5.0, 1e-6);
  EXPECT_NEAR(g(1.0), 65.0, 1e-6);
  expect_valid_smooth(g, cons);
  const auto q = as_measure(g);
  EXPECT_NEAR(q.support().lower, 5.0, 1e-6);
  EXPECT_NEAR(q.support().upper, 65.0, 1e-6);
}

TEST(FitSmooth, RequiresExtremalConstraintsAndPositiveDegree) {
  const auto p = UnivariateMeasure::uniform(0.0, 1.0);
  EXPECT_THROW(fit_smooth(p, {{0.2, 0.1}, {1.0, 1.0}}, 3), ConfigError);
  EXPECT_THROW(fit_smooth(p, {{0.0, 0.0}, {1.0, 1.0}}, 0), ConfigError);
  EXPECT_THROW(fit_smooth(p, {{0.0, 0.0}, {0.5, 0.7}, {0.6, 0.6}, {1.0, 1.0}}, 3), EmptyClassError);
}

TEST(FitSmooth, NeverBeatsTheExactProjection) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = rep % 2 == 0 ? UnivariateMeasure::truncated_gaussian(10.0 * u(rng), 2.0, -5.0, 25.0)
                                : UnivariateMeasure::triangular(0.0, 10.0 * u(rng), 10.0);
    const auto s = p.support();
    const double a = 0.2 + 0.6 * u(rng);
    const double b = p.quantile_left(a) + (u(rng) - 0.5) * 1.0;
    ConstraintList cons = {{0.0, s.lower - u(rng)}, {a, b}, {1.0, s.upper + u(rng)}};
    const auto g = fit_smooth(p, cons, 3 + rep % 5);
    const double exact = w2_cost(project_exact(p, cons));
    EXPECT_GE(l2_squared_to_base(g, p), exact * exact - 1e-10) << "case " << rep;
    expect_valid_smooth(g, cons);
  }
}

TEST(FitSmooth, UniqueUnderPermutationAndStartingPoint) {
  const auto p = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  const ConstraintList cons = {{0.0, 18.0}, {0.3, 31.0}, {0.7, 39.0}, {1.0, 55.0}};
  const ConstraintList permuted = {cons[2], cons[0], cons[3], cons[1]};
  const auto a = fit_smooth(p, cons, 7);
  const auto b = fit_smooth(p, permuted, 7);
  SmoothOptions other;
  other.segment.start = StartPoint::random;
  other.segment.start_seed = 5;
  const auto c = fit_smooth(p, cons, 7, other);
  for (std::size_t i = 0; i < a.segments().size(); ++i) {
    const double scale = 1.0 + a.segments()[i].local.cwiseAbs().maxCoeff();
    EXPECT_LT((a.segments()[i].local - b.segments()[i].local).cwiseAbs().maxCoeff(), 1e-5 * scale);
    EXPECT_LT((a.segments()[i].local - c.segments()[i].local).cwiseAbs().maxCoeff(), 1e-5 * scale);
  }
}

TEST(FitSmooth, ValueScalingDoesNotChangeTheFit) {
  const auto p = UnivariateMeasure::triangular(0.0, 3.0, 10.0);
  const ConstraintList cons = {{0.0, 0.0}, {0.4, 4.0}, {1.0, 10.0}};
  SmoothOptions plain;
  plain.prescale = false;
  for (int d = 2; d <= 6; ++d) {
    const auto scaled = fit_smooth(p, cons, d);
    const auto raw = fit_smooth(p, cons, d, plain);
    for (int k = 0; k <= 200; ++k) EXPECT_NEAR(scaled(k / 200.0), raw(k / 200.0), 1e-5) << "d=" << d;
  }
}

TEST(SmoothGqfModel, CdfInvertsTheCurve) {
  const auto p = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  const auto g = fit_smooth(p, {{0.0, 20.0}, {0.5, 35.0}, {1.0, 50.0}}, 5);
  const auto q = as_measure(g);
  for (int k = 1; k < 20; ++k) {
    const double y = k / 20.0;
    EXPECT_NEAR(q.cdf(q.quantile_left(y)), y, 1e-9);
  }
}
