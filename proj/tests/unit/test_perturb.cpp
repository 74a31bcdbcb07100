#include <gtest/gtest.h>

#include <cmath>

#include "qcwass/perturb.hpp"
#include "qcwass/project.hpp"

using namespace qcwass;

TEST(ShiftTarget, EndpointsAndIdentity) {
  EXPECT_EQ(shift_target(12.0, 9.5, 14.5, 1.0), 14.5);
  EXPECT_EQ(shift_target(12.0, 9.5, 14.5, 0.0), 12.0);
  EXPECT_EQ(shift_target(12.0, 9.5, 14.5, -1.0), 9.5);
}

TEST(ShiftTarget, StrictlyIncreasingAndSignConsistent) {
  double prev = -1e300;
  for (int k = 0; k <= 200; ++k) {
    const double theta = -1.0 + k / 100.0;
    const double b = shift_target(12.0, 9.5, 14.5, theta);
    EXPECT_GT(b, prev);
    prev = b;
    EXPECT_EQ(theta < 0.0, b < 12.0);
    EXPECT_EQ(theta > 0.0, b > 12.0);
    EXPECT_GE(b, 9.5);
    EXPECT_LE(b, 14.5);
  }
}

TEST(ShiftTarget, RejectsBadArguments) {
  EXPECT_THROW(shift_target(12.0, 12.5, 14.5, 0.0), DomainError);
  EXPECT_THROW(shift_target(12.0, 9.5, 11.0, 0.0), DomainError);
  EXPECT_THROW(shift_target(12.0, 9.5, 14.5, 1.01), DomainError);
}

TEST(Dilatation, KsDomainExamples) {
  const auto wide = dilatation_targets(20.0, 50.0, 2.0, 1.0);
  EXPECT_EQ(wide.b0, 5.0);
  EXPECT_EQ(wide.b1, 65.0);
  const auto narrow = dilatation_targets(20.0, 50.0, 2.0, -1.0);
  EXPECT_EQ(narrow.b0, 27.5);
  EXPECT_EQ(narrow.b1, 42.5);
  const auto same = dilatation_targets(20.0, 50.0, 2.0, 0.0);
  EXPECT_EQ(same.b0, 20.0);
  EXPECT_EQ(same.b1, 50.0);
}

TEST(Dilatation, MidpointAndDiameterProperties) {
  for (double eta : {1.1, 2.0, 3.7}) {
    double prev_ratio = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double theta = -1.0 + k / 50.0;
      const auto [b0, b1] = dilatation_targets(-3.0, 11.0, eta, theta);
      EXPECT_NEAR(b0 + b1, 8.0, 1e-12 * 8.0);
      const double ratio = (b1 - b0) / 14.0;
      EXPECT_GE(ratio, 1.0 / eta - 1e-12);
      EXPECT_LE(ratio, eta + 1e-12);
      EXPECT_EQ(theta < 0.0, ratio < 1.0);
      EXPECT_EQ(theta > 0.0, ratio > 1.0);
      EXPECT_GT(ratio, prev_ratio);
      prev_ratio = ratio;
    }
  }
}

TEST(Dilatation, RejectsBadArguments) {
  EXPECT_THROW(dilatation_targets(50.0, 20.0, 2.0, 0.0), DomainError);
  EXPECT_THROW(dilatation_targets(20.0, 50.0, 1.0, 0.0), DomainError);
}

TEST(ValidateClass, SortsAndAccepts) {
  const auto out = validate_class({{0.8, 3.0}, {0.2, 1.0}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (QuantileConstraint{0.2, 1.0}));
  EXPECT_EQ(out[1], (QuantileConstraint{0.8, 3.0}));
}

TEST(ValidateClass, RejectsNonIncreasingPairs) {
  try {
    validate_class({{0.2, 3.0}, {0.8, 1.0}});
    FAIL() << "expected EmptyClassError";
  } catch (const EmptyClassError& e) {
    EXPECT_EQ(e.first_index(), 0u);
    EXPECT_EQ(e.second_index(), 1u);
  }
  EXPECT_THROW(validate_class({{0.5, 2.0}, {0.5, 2.5}}), EmptyClassError);
  EXPECT_THROW(validate_class({}), EmptyClassError);
  EXPECT_THROW(validate_class({{1.5, 2.0}}), DomainError);
}

TEST(Materialize, ShiftWithFixedTails) {
  const auto p = UnivariateMeasure::uniform(0.0, 15.0);
  ConstraintList fixed = {{0.0, 0.0}, {1.0, 15.0}};
  for (const auto& c : preserve_quantiles(p, {0.1, 0.5})) fixed.push_back(c);
  const auto scheme = PerturbationScheme::shift(0.8, p.quantile_left(0.8), 9.5, 14.5, fixed);
  const auto at0 = materialize(scheme, 0.0);
  EXPECT_NE(std::find(at0.begin(), at0.end(), QuantileConstraint{0.8, 12.0}), at0.end());
  EXPECT_TRUE(std::is_sorted(at0.begin(), at0.end(), [](auto& a, auto& b) { return a.alpha < b.alpha; }));
  // The theta = 0 class contains P, so the projection is the identity.
  EXPECT_TRUE(project_exact(p, at0).is_identity());
}

TEST(Materialize, DilatationWithoutFixedConstraints) {
  const auto scheme = PerturbationScheme::dilatation(20.0, 50.0, 2.0);
  const auto c = materialize(scheme, 1.0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (QuantileConstraint{0.0, 5.0}));
  EXPECT_EQ(c[1], (QuantileConstraint{1.0, 65.0}));
}

TEST(Materialize, CollisionWithFixedConstraintIsEmptyClass) {
  const auto scheme = PerturbationScheme::shift(0.8, 12.0, 9.5, 14.5, {{0.9, 13.0}});
  EXPECT_NO_THROW(materialize(scheme, 0.0));
  EXPECT_THROW(materialize(scheme, 1.0), EmptyClassError);
  const auto same_alpha = PerturbationScheme::shift(0.8, 12.0, 9.5, 14.5, {{0.8, 12.0}});
  EXPECT_THROW(materialize(same_alpha, 0.5), EmptyClassError);
}

TEST(Materialize, SchemeInvariants) {
  EXPECT_THROW(PerturbationScheme::shift(0.8, 12.0, 12.0, 14.5), DomainError);
  EXPECT_THROW(PerturbationScheme::dilatation(20.0, 50.0, 0.5), DomainError);
  EXPECT_THROW(materialize(PerturbationScheme::dilatation(20.0, 50.0, 2.0), 1.5), DomainError);
}

TEST(ThetaGrid, DefaultHasTwentyOnePointsWithExactZero) {
  const auto g = theta_grid();
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g.front(), -1.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_EQ(g[10], 0.0);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
}
