#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qer/amplitude.hpp"
#include "qer/random.hpp"

using namespace qer;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(UniformAngle, IsQuarterTurnWithEvenOdds) {
    EXPECT_DOUBLE_EQ(uniform_angle(), pi / 4);
    EXPECT_EQ(accept_probability(uniform_angle()), 0.5);
    const auto a = Amplitude2::from_angle(uniform_angle());
    EXPECT_NEAR(a.c0 * a.c0, 0.5, 1e-15);
}

TEST(ApplyRotation, RotatesBasisState) {
    const auto r = apply_rotation({1.0, 0.0}, pi / 4);
    EXPECT_NEAR(r.c0, std::sqrt(2.0) / 2, 1e-15);
    EXPECT_NEAR(r.c1, std::sqrt(2.0) / 2, 1e-15);
}

TEST(ApplyRotation, ZeroAngleIsIdentity) {
    const Amplitude2 s{0.6, 0.8};
    const auto r = apply_rotation(s, 0.0);
    EXPECT_EQ(r.c0, 0.6);
    EXPECT_EQ(r.c1, 0.8);
}

TEST(ApplyRotation, InverseRotationUndoes) {
    const double h = std::sqrt(2.0) / 2;
    const auto r = apply_rotation({h, h}, -pi / 4);
    EXPECT_NEAR(r.c0, 1.0, 1e-15);
    EXPECT_NEAR(r.c1, 0.0, 1e-15);
}

TEST(PreparationFactor, TableValues) {
    EXPECT_NEAR(preparation_factor(0, 0.03 * pi, 2e6), 0.015 * pi, 1e-15);
    EXPECT_NEAR(preparation_factor(2e6, 0.03 * pi, 2e6), 0.03 * pi / (1 + std::numbers::e), 1e-15);
    EXPECT_NEAR(preparation_factor(2e6, 0.03 * pi, 2e6) / pi, 0.00807, 1e-5);
}

TEST(PreparationFactor, StrictlyDecreasingTowardZero) {
    double prev = preparation_factor(0, 0.03 * pi, 2e6);
    for (double te = 1e5; te <= 1e8; te *= 1.7) {
        const double s = preparation_factor(te, 0.03 * pi, 2e6);
        EXPECT_LT(s, prev);
        EXPECT_GE(s, 0.0);
        prev = s;
    }
    EXPECT_LT(preparation_factor(1e9, 0.03 * pi, 2e6), 1e-100);
}

TEST(PreparationFactor, RejectsNonPositiveZeta2) {
    EXPECT_THROW(preparation_factor(0, 0.1, 0.0), std::invalid_argument);
    EXPECT_THROW(preparation_factor(0, 0.1, -1.0), std::invalid_argument);
}

TEST(DepreciationFactor, TableValues) {
    EXPECT_NEAR(depreciation_factor(1e6, 10, pi, 1e6), pi / (10 * (1 + std::numbers::e)), 1e-15);
    EXPECT_NEAR(depreciation_factor(1e6, 10, pi, 1e6), 0.0845, 1e-4);
    EXPECT_NEAR(depreciation_factor(1e15, 1, pi, 1e6), pi / 2, 1e-8);
    EXPECT_EQ(depreciation_factor(0, 1, pi, 1e6), 0.0);
    EXPECT_EQ(depreciation_factor(0, 37, pi, 1e6), 0.0);
    EXPECT_EQ(depreciation_factor(1e-3, 1, pi, 1e6), 0.0);
}

TEST(DepreciationFactor, ShapeInTimeAndReplayCount) {
    double prev = 0.0;
    for (double te = 1e4; te <= 1e8; te *= 1.5) {
        const double w = depreciation_factor(te, 3, pi, 1e6);
        EXPECT_GT(w, prev);
        prev = w;
    }
    for (double rt = 1; rt < 100; rt += 1) {
        EXPECT_GT(depreciation_factor(5e5, rt, pi, 1e6), depreciation_factor(5e5, rt + 1, pi, 1e6));
    }
}

TEST(DepreciationFactor, RejectsRtMaxBelowOne) {
    EXPECT_THROW(depreciation_factor(10, 0.5, pi, 1e6), std::invalid_argument);
}

TEST(RotationCount, TableValues) {
    EXPECT_EQ(rotation_count(1.0, 1.0, 0.015 * pi, 100, 0.25 * pi), 83);
    EXPECT_EQ(rotation_count(0.5, 1.0, 0.015 * pi, 100, 0.25 * pi), 33);
    EXPECT_EQ(rotation_count(1.0, 1.0, 0.00228 * pi, 100, 0.25 * pi), -10);
}

TEST(RotationCount, RejectsInvalidSchedule) {
    EXPECT_THROW(rotation_count(1, 1, 0.0, 100, 1), std::invalid_argument);
    EXPECT_THROW(rotation_count(1, 1, -0.1, 100, 1), std::invalid_argument);
    EXPECT_THROW(rotation_count(1, 0, 0.1, 100, 1), std::invalid_argument);
}

TEST(RotationCount, NonDecreasingInPriority) {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double sigma = rng.uniform(1e-4, 0.1);
        const double a = rng.uniform(), b = rng.uniform();
        const double lo = std::min(a, b), hi = std::max(a, b);
        EXPECT_LE(rotation_count(lo, 1.0, sigma, 100, pi / 4), rotation_count(hi, 1.0, sigma, 100, pi / 4));
    }
}

TEST(ComposeAngle, Examples) {
    EXPECT_DOUBLE_EQ(compose_angle(0, 0.3, 0, 0.7), pi / 4);
    EXPECT_DOUBLE_EQ(compose_angle(83, 0.015 * pi, 0, 0.0), pi / 2);
    EXPECT_NEAR(compose_angle(4, 0.05, 2, 0.1), pi / 4, 1e-15);
}

TEST(ComposeAngle, StrictlyIncreasingBeforeClamp) {
    for (std::int64_t m = -50; m < 50; ++m) EXPECT_LT(unclamped_angle(m, 0.01, 3, 0.02), unclamped_angle(m + 1, 0.01, 3, 0.02));
}

TEST(ComposeAngle, AlwaysInsideClampRange) {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const auto m = static_cast<std::int64_t>(rng.below(2001)) - 1000;
        const double th = compose_angle(m, rng.uniform(0, 0.1), rng.below(100), rng.uniform(0, 1.6));
        EXPECT_GE(th, kThetaFloor);
        EXPECT_LE(th, pi / 2);
    }
}

TEST(AcceptProbability, Examples) {
    EXPECT_EQ(accept_probability(pi / 4), 0.5);
    EXPECT_DOUBLE_EQ(accept_probability(pi / 2), 1.0);
    EXPECT_NEAR(accept_probability(pi / 6), 0.25, 1e-15);
    EXPECT_GT(accept_probability(kThetaFloor), 2.4e-3);
}

TEST(Amplitude2, UnitarityProperty) {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const auto s = Amplitude2::from_angle(rng.uniform(-pi, pi));
        const auto r = apply_rotation(s, rng.uniform(-10, 10));
        EXPECT_NEAR(r.norm_squared(), 1.0, 1e-12);
    }
}

TEST(Amplitude2, CompositionMatchesSingleRotation) {
    Rng rng(10);
    for (int i = 0; i < 20; ++i) {
        const double sigma = rng.uniform(0, 0.1);
        const auto m = 1 + rng.below(10000);
        Amplitude2 s = Amplitude2::from_angle(uniform_angle());
        for (std::uint64_t k = 0; k < m; ++k) s = apply_rotation(s, sigma);
        const auto once = apply_rotation(Amplitude2::from_angle(uniform_angle()), static_cast<double>(m) * sigma);
        EXPECT_NEAR(s.c0, once.c0, 1e-9);
        EXPECT_NEAR(s.c1, once.c1, 1e-9);
    }
}

TEST(Amplitude2, AngleVectorConsistency) {
    const double h = std::sqrt(2.0) / 2;
    for (double th = 0; th <= pi / 2; th += 1e-3) {
        const auto r = apply_rotation({h, h}, th - pi / 4);
        EXPECT_NEAR(accept_probability(th), r.c1 * r.c1, 1e-10);
    }
}

TEST(ScheduleParams, DefaultsAndValidation) {
    ScheduleParams p;
    EXPECT_DOUBLE_EQ(p.zeta1, 0.03 * pi);
    EXPECT_EQ(p.zeta2, 2e6);
    EXPECT_DOUBLE_EQ(p.tau1, pi);
    EXPECT_EQ(p.tau2, 1e6);
    EXPECT_EQ(p.mu, 100);
    EXPECT_DOUBLE_EQ(p.iota, 0.25 * pi);
    EXPECT_NO_THROW(p.validate());
    p.mu = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.zeta1 = -1;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.tau2 = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(RotationSchedule, CountUsesDeltaMax) {
    RotationSchedule s;
    s.delta_max = 2.0;
    EXPECT_EQ(s.count(2.0, 0.015 * pi), 83);
    EXPECT_EQ(s.count(1.0, 0.015 * pi), 33);
    EXPECT_EQ(s.omega(0), 0.0);
    EXPECT_NEAR(s.sigma(0), 0.015 * pi, 1e-15);
}

TEST(Rng, DeterministicAndInRange) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        EXPECT_EQ(u, b.uniform());
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    EXPECT_THROW(a.below(0), std::invalid_argument);
    EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
}

TEST(RecordedStream, ReplaysThenThrows) {
    const std::vector<double> v{0.1, 0.9};
    RecordedStream s(v);
    EXPECT_EQ(s.uniform(), 0.1);
    EXPECT_EQ(s.uniform(), 0.9);
    EXPECT_EQ(s.consumed(), 2u);
    EXPECT_THROW(s.uniform(), std::out_of_range);
}
