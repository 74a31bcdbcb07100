#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qcwass/measures.hpp"
#include "qcwass/project.hpp"

using namespace qcwass;

namespace {

std::vector<UnivariateMeasure> all_kinds() {
  return {
      UnivariateMeasure::empirical({1.0, 2.0, 2.0, 3.5, 4.0, 7.0}),
      UnivariateMeasure::uniform(0.0, 1.0),
      UnivariateMeasure::triangular(49.0, 50.0, 51.0),
      UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0),
      UnivariateMeasure::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0),
      as_measure(project_exact(UnivariateMeasure::uniform(0.0, 1.0), {{0.5, 0.7}})),
  };
}

}  // namespace

TEST(Cdf, EmpiricalCountsPointsAtOrBelow) {
  const auto m = UnivariateMeasure::empirical({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.cdf(2.0), 0.5);
  EXPECT_DOUBLE_EQ(m.cdf(0.5), 0.0);
  EXPECT_DOUBLE_EQ(m.cdf(4.0), 1.0);
}

TEST(Cdf, SymmetricKindsAtTheirCentre) {
  EXPECT_NEAR(UnivariateMeasure::triangular(49.0, 50.0, 51.0).cdf(50.0), 0.5, 1e-15);
  EXPECT_NEAR(UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0).cdf(35.0), 0.5, 1e-14);
}

TEST(Quantile, EmpiricalLeftAndRightAtAFlat) {
  const auto m = UnivariateMeasure::empirical({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.quantile_left(0.5), 2.0);
  EXPECT_DOUBLE_EQ(m.quantile_right(0.5), 3.0);
  EXPECT_DOUBLE_EQ(m.quantile_left(1.0), 4.0);
  EXPECT_DOUBLE_EQ(m.quantile_right(0.0), 1.0);
}

TEST(Quantile, TriangularMedianIsMode) {
  EXPECT_NEAR(UnivariateMeasure::triangular(54.0, 55.0, 56.0).quantile_left(0.5), 55.0, 1e-14);
}

TEST(Quantile, InvertibleKindsHaveEqualLeftAndRight) {
  for (const auto& m : {UnivariateMeasure::uniform(0.0, 1.0), UnivariateMeasure::triangular(0.0, 2.0, 3.0),
                        UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0),
                        UnivariateMeasure::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0)}) {
    for (int k = 1; k <= 9; ++k) {
      const double a = k / 10.0;
      EXPECT_EQ(m.quantile_left(a), m.quantile_right(a)) << m.describe() << " a=" << a;
    }
  }
}

TEST(Quantile, EndpointsAreSupportBounds) {
  const auto m = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  EXPECT_EQ(m.quantile_left(0.0), 20.0);
  EXPECT_EQ(m.quantile_right(1.0), 50.0);
  EXPECT_THROW(m.quantile_left(1.5), DomainError);
  EXPECT_THROW(m.quantile_right(-0.1), DomainError);
}

TEST(Quantile, TruncatedGaussianMatchesRenormalizedNormal) {
  const auto m = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double a = (phi(1.0) - phi(-3.0)) / (phi(3.0) - phi(-3.0));
  EXPECT_NEAR(m.quantile_left(a), 40.0, 1e-9);
}

TEST(Properties, GaloisInequalityForEveryKind) {
  std::mt19937_64 rng(7);
  for (const auto& m : all_kinds()) {
    const auto s = m.support();
    std::uniform_real_distribution<double> level(1e-9, 1.0);
    std::uniform_real_distribution<double> point(s.lower - 1.0, s.upper + 1.0);
    for (int k = 0; k < 1000; ++k) {
      const double a = level(rng);
      const double t = point(rng);
      EXPECT_EQ(m.quantile_left(a) <= t, a <= m.cdf(t)) << m.describe() << " a=" << a << " t=" << t;
    }
  }
}

TEST(Properties, QuantilesAreOrderedAndMonotone) {
  for (const auto& m : all_kinds()) {
    double prev = -1e300;
    for (int k = 1; k < 200; ++k) {
      const double a = k / 200.0;
      EXPECT_LE(m.quantile_left(a), m.quantile_right(a));
      EXPECT_GE(m.quantile_left(a), prev);
      prev = m.quantile_left(a);
    }
  }
}

TEST(Properties, EmpiricalQuantileOfCdfAtAtoms) {
  const std::vector<double> v = {0.3, 1.1, 1.1, 2.0, 5.5, 6.0, 6.0, 6.0, 9.0};
  const auto m = UnivariateMeasure::empirical(v);
  for (double x : v) EXPECT_EQ(m.quantile_left(m.cdf(x)), x);
  const std::size_t n = v.size();
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i <= n; ++i) EXPECT_EQ(m.quantile_left(static_cast<double>(i) / n), sorted[i - 1]);
}

TEST(Wasserstein, IdentityAndPointMasses) {
  const auto p = UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0);
  EXPECT_EQ(w2_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(w2_distance(UnivariateMeasure::point_mass(0.0), UnivariateMeasure::point_mass(3.0)), 3.0);
}

TEST(Wasserstein, UniformAgainstItsProjection) {
  const auto p = UnivariateMeasure::uniform(0.0, 1.0);
  const auto q = as_measure(project_exact(p, {{0.5, 0.7}}));
  const double expected =
      std::sqrt(oracle::piecewise_gauss([](double y) { return (y - 0.7) * (y - 0.7); }, {0.5, 0.7}));
  EXPECT_NEAR(expected, std::sqrt(0.008 / 3.0), 1e-15);
  EXPECT_NEAR(w2_distance(p, q), expected, 1e-10);
}

TEST(Wasserstein, SortedCouplingIdentityForEqualSizes) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x(37), y(37);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng) + 1.0;
    const auto p = UnivariateMeasure::empirical(x);
    const auto q = UnivariateMeasure::empirical(y);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double direct = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) direct += (x[i] - y[i]) * (x[i] - y[i]);
    direct /= static_cast<double>(x.size());
    EXPECT_NEAR(w2_squared(p, q), direct, 1e-12 * (1.0 + direct));
    // Quadrature path over the same gqfs.
    const double quad = oracle::piecewise_gauss(
        [&](double a) {
          const double d = p.quantile_right(a) - q.quantile_right(a);
          return d * d;
        },
        [&] {
          std::vector<double> cuts = {0.0, 1.0};
          for (int k = 1; k < 37; ++k) cuts.push_back(k / 37.0);
          return cuts;
        }(),
        4);
    EXPECT_NEAR(quad, direct, 1e-9 * (1.0 + direct));
  }
}

TEST(Wasserstein, SymmetryAndTriangleInequality) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  auto random_measure = [&](int k) -> UnivariateMeasure {
    switch (k % 3) {
      case 0: {
        std::vector<double> v(5 + k);
        for (auto& x : v) x = u(rng);
        return UnivariateMeasure::empirical(v);
      }
      case 1: {
        const double a = u(rng);
        return UnivariateMeasure::triangular(a, a + 1.0, a + 3.0);
      }
      default: {
        const double a = u(rng);
        return UnivariateMeasure::truncated_gaussian(a, 1.0, a - 2.0, a + 2.5);
      }
    }
  };
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = random_measure(rep), b = random_measure(rep + 1), c = random_measure(rep + 2);
    EXPECT_NEAR(w2_distance(a, b), w2_distance(b, a), 1e-8);
    EXPECT_LE(w2_distance(a, c), w2_distance(a, b) + w2_distance(b, c) + 1e-8);
  }
}

TEST(Sampling, PointMassAndDeterminism) {
  const auto s = sample(UnivariateMeasure::point_mass(5.0), 10, 3);
  for (double v : s.values()) EXPECT_EQ(v, 5.0);
  const auto m = UnivariateMeasure::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0);
  const auto a = sample(m, 100, 42);
  const auto b = sample(m, 100, 42);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST(Sampling, UniformPassesKolmogorovSmirnov) {
  const auto m = UnivariateMeasure::uniform(0.0, 1.0);
  const auto s = sample(m, 100000, 2024);
  const double d = ks_statistic(s, m);
  EXPECT_LT(d, 0.01);
  EXPECT_LT(d, oracle::ks_critical(100000, 0.01));
  EXPECT_NEAR(ks_critical_value(100000, 0.01), oracle::ks_critical(100000, 0.01), 1e-15);
}

TEST(Sampling, RejectsEmptyRequests) {
  EXPECT_THROW(sample(UnivariateMeasure::uniform(0.0, 1.0), 0, 1), DomainError);
  EXPECT_THROW(EmpiricalSample(std::vector<double>{}), DomainError);
  EXPECT_THROW(EmpiricalSample(std::vector<double>{1.0, NAN}), DomainError);
}
