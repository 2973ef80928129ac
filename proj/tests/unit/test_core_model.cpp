#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "sivstark/core_model.hpp"
#include "sivstark/errors.hpp"

using namespace sivstark;

TEST(TransitionFrequency, DirectEvaluation) {
  const StarkParams p{0.0, 15.0, 0.0};
  EXPECT_DOUBLE_EQ(transition_frequency(p, 30.0), -13.5);
  EXPECT_NEAR(transition_frequency(p, 26.0), -10.14, 1e-12);
  EXPECT_GT(std::abs(transition_frequency(p, 26.0)), 10.0);
}

TEST(TransitionFrequency, VertexGivesFmax) {
  const StarkParams p{406700.25, 7.3, 4.2};
  EXPECT_EQ(transition_frequency(p, p.e0_MVpm), p.f_max_GHz);
}

TEST(StarkShift, Examples) {
  EXPECT_EQ(stark_shift({0.0, 15.0, 0.0}, 0.0), -0.0);
  EXPECT_DOUBLE_EQ(stark_shift({0.0, 15.0, 0.0}, 30.0), -13.5);
  EXPECT_NEAR(stark_shift({0.0, 1.4, 0.0}, 30.0), -1.26, 1e-12);
  EXPECT_EQ(stark_shift({12.0, 3.0, -2.0}, -2.0), 0.0);
}

TEST(StarkShift, NonPositiveAndSymmetric) {
  oracle::Gen gen(11);
  for (int k = 0; k < 2000; ++k) {
    const StarkParams p{gen.uniform(-50, 50), gen.uniform(1e-3, 20), gen.uniform(-10, 10)};
    const double x = gen.uniform(-60, 60);
    const double s = stark_shift(p, p.e0_MVpm + x);
    EXPECT_LE(s, 0.0);
    if (x != 0.0) {
      EXPECT_LT(s, 0.0);
    }
    EXPECT_NEAR(s, stark_shift(p, p.e0_MVpm - x), 1e-12 * (1.0 + std::abs(s)));
  }
}

TEST(FieldsForFrequency, Examples) {
  const StarkParams p{0.0, 15.0, 5.0};
  EXPECT_EQ(fields_for_frequency(p, 0.0), std::vector<double>{5.0});
  EXPECT_TRUE(fields_for_frequency(p, 1.0).empty());
  const auto r = fields_for_frequency(p, -13.5);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], -25.0, 1e-12);
  EXPECT_NEAR(r[1], 35.0, 1e-12);
  for (double e : r) EXPECT_NEAR(transition_frequency(p, e), -13.5, 1e-12);
}

TEST(FieldsForFrequency, DegenerateAlpha) {
  EXPECT_THROW(fields_for_frequency({0.0, 0.0, 1.0}, -1.0), DegenerateQuadratic);
  EXPECT_THROW(fields_for_frequency({0.0, 0.5 * alpha_epsilon, 1.0}, -1.0), DegenerateQuadratic);
  EXPECT_NO_THROW(fields_for_frequency({0.0, alpha_epsilon, 1.0}, -1.0));
}

TEST(FieldsForFrequency, RoundTripAgainstBisection) {
  oracle::Gen gen(5);
  for (int k = 0; k < 500; ++k) {
    const StarkParams p{gen.uniform(-20, 20), gen.uniform(0.5, 20), gen.uniform(-10, 10)};
    const double target = p.f_max_GHz - gen.uniform(1e-3, 30);
    const auto r = fields_for_frequency(p, target);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_LT(r[0], r[1]);
    for (double e : r) EXPECT_LT(std::abs(transition_frequency(p, e) - target), 1e-9);
    // independent root on the right flank
    const double right = oracle::bisect([&](double e) { return transition_frequency(p, e) - target; }, p.e0_MVpm,
                                        p.e0_MVpm + 1e3);
    EXPECT_NEAR(r[1], right, 1e-8);
  }
}

TEST(TransitionLadder, SiFigureSplittings) {
  const auto f = transition_ladder({406.7, 76.0, 273.0});
  using T = TransitionLabel;
  EXPECT_NEAR(f.at(T::A) - f.at(T::B), 76.0, 1e-9);
  EXPECT_NEAR(f.at(T::B) - f.at(T::C), 197.0, 1e-9);
  EXPECT_NEAR(f.at(T::C) - f.at(T::D), 76.0, 1e-9);
  EXPECT_NEAR(f.at(T::A) - f.at(T::D), 349.0, 1e-9);
}

TEST(TransitionLadder, DefaultsAndDegenerate) {
  const auto f = transition_ladder(LevelStructure{});
  EXPECT_NEAR(f.at(TransitionLabel::A) - f.at(TransitionLabel::D), 300.0, 1e-9);
  const auto z = transition_ladder({406.7, 0.0, 0.0});
  for (auto t : all_transitions) EXPECT_EQ(z.at(t), 406700.0);
}

TEST(TransitionLadder, StrictlyDescendingProperty) {
  oracle::Gen gen(3);
  for (int k = 0; k < 1000; ++k) {
    const double gs = gen.uniform(1, 200);
    const LevelStructure l{gen.uniform(400, 410), gs, gs + gen.uniform(1e-3, 400)};
    const auto f = transition_ladder(l);
    EXPECT_GT(f.at(TransitionLabel::A), f.at(TransitionLabel::B));
    EXPECT_GT(f.at(TransitionLabel::B), f.at(TransitionLabel::C));
    EXPECT_GT(f.at(TransitionLabel::C), f.at(TransitionLabel::D));
    EXPECT_NEAR(f.at(TransitionLabel::A) - f.at(TransitionLabel::B), l.gs_split_GHz, 1e-9);
    EXPECT_NEAR(f.at(TransitionLabel::C) - f.at(TransitionLabel::D), l.gs_split_GHz, 1e-9);
    EXPECT_NEAR(f.at(TransitionLabel::A) - f.at(TransitionLabel::D), l.gs_split_GHz + l.es_split_GHz, 1e-9);
  }
}

TEST(PropagateFieldUncertainty, PowerRule) {
  EXPECT_EQ(propagate_field_uncertainty(0.07), 0.14);
  EXPECT_EQ(propagate_field_uncertainty(0.0), 0.0);
  EXPECT_EQ(propagate_field_uncertainty(0.10), 0.20);
  EXPECT_THROW(propagate_field_uncertainty(1.0), std::invalid_argument);
  EXPECT_THROW(propagate_field_uncertainty(-0.1), std::invalid_argument);
}

TEST(PropagateFieldUncertainty, MatchesFiniteDifference) {
  // relative change of alpha*E^2 for a small relative change of E
  const double d = 1e-6;
  const double rel = ((1 + d) * (1 + d) - 1.0) / d;
  EXPECT_NEAR(propagate_field_uncertainty(0.05) / 0.05, rel, 1e-5);
}

TEST(StarkLaw, NoLinearOrCubicTermInPolynomialFit) {
  // cubic least squares in the vertex frame on an asymmetric field grid
  const StarkParams p{3.0, 9.0, 4.0};
  const int n = 37;
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (int k = 0; k < n; ++k) {
    const double u = -7.0 + 31.0 * k / (n - 1);
    a.row(k) << 1.0, u, u * u, u * u * u;
    y(k) = transition_frequency(p, p.e0_MVpm + u);
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(c(0), 3.0, 1e-10);
  EXPECT_NEAR(c(1), 0.0, 1e-10);
  EXPECT_NEAR(c(2), -9e-3, 1e-12);
  EXPECT_NEAR(c(3), 0.0, 1e-12);
}

TEST(Labels, ParseAndPrint) {
  for (auto t : all_transitions) EXPECT_EQ(parse_transition(to_string(t)), t);
  EXPECT_THROW(parse_transition("E"), std::invalid_argument);
}

TEST(Validation, ParamsAndEmitter) {
  EXPECT_THROW(validate(StarkParams{0.0, -1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(validate(StarkParams{0.0, 1.0, NAN}), std::invalid_argument);
  EXPECT_NO_THROW(validate(StarkParams{0.0, 1.0, -3.0}));  // negative e0 allowed
  Emitter em;
  em.id = "x";
  EXPECT_THROW(validate(em, 7.6), std::invalid_argument);
  em.stark[TransitionLabel::C] = {0.0, 1.0, 0.0};
  EXPECT_NO_THROW(validate(em, 7.6));
  em.position.distance_um = 8.0;
  EXPECT_THROW(validate(em, 7.6), std::invalid_argument);
  EXPECT_THROW(em.params(TransitionLabel::A), std::invalid_argument);
}
