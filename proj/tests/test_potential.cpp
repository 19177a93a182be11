#include "rdlab/catalog.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rdlab;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

bool has_point(const std::vector<CriticalPoint>& pts, double u, PointClass kind) {
    for (const auto& p : pts)
        if (std::abs(p.u[0] - u) < 1e-10 && p.kind == kind) return true;
    return false;
}

}  // namespace

TEST(Potential, DoubleWellAtMinimum) {
    const auto e = eval_potential(*double_well(), v1(1.0));
    EXPECT_NEAR(e.value, 0.0, 1e-15);
    EXPECT_NEAR(e.gradient[0], 0.0, 1e-15);
    EXPECT_NEAR(e.hessian(0, 0), 2.0, 1e-14);
}

TEST(Potential, DoubleWellAtSaddle) {
    const auto e = eval_potential(*double_well(), v1(0.0));
    EXPECT_DOUBLE_EQ(e.value, 0.25);
    EXPECT_DOUBLE_EQ(e.gradient[0], 0.0);
    EXPECT_DOUBLE_EQ(e.hessian(0, 0), -1.0);
}

TEST(Potential, CubicBistableAtInvadingState) {
    const auto e = eval_potential(*cubic_bistable(0.25), v1(1.0));
    EXPECT_NEAR(e.value, -1.0 / 24.0, 1e-15);
    EXPECT_NEAR(e.gradient[0], 0.0, 1e-15);
    EXPECT_NEAR(e.hessian(0, 0), 0.75, 1e-14);
}

TEST(Potential, TripleWellLevelsAreOrdered) {
    const auto V = triple_well(0.06, 0.02);
    EXPECT_NEAR(V->value(v1(1.0)), 0.06, 1e-14);
    EXPECT_NEAR(V->value(v1(0.0)), 0.0, 1e-15);
    EXPECT_NEAR(V->value(v1(-1.0)), -0.02, 1e-14);
    for (double u : {-1.0, 0.0, 1.0}) EXPECT_NEAR(V->gradient(v1(u))[0], 0.0, 1e-13);
}

TEST(Potential, UnknownNameAndBadParameterAreRejected) {
    EXPECT_THROW(make_potential("nope", {}), std::invalid_argument);
    EXPECT_THROW(cubic_bistable(1.5), std::invalid_argument);
    EXPECT_THROW(eval_potential(*double_well(), v1(std::nan(""))), std::invalid_argument);
}

TEST(Potential, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    const std::vector<PotentialPtr> models = {double_well(), cubic_bistable(0.25), triple_well(0.06, 0.02),
                                              make_potential("coupled_dw", {0.1})};
    for (int trial = 0; trial < 100; ++trial) {
        const auto& V = models[trial % models.size()];
        Vec u(V->dim()), dir(V->dim());
        for (int i = 0; i < V->dim(); ++i) {
            u[i] = U(rng);
            dir[i] = U(rng);
        }
        dir.normalize();
        const double g = V->gradient(u).dot(dir);
        const double e1 = std::abs((V->value(u + 1e-3 * dir) - V->value(u - 1e-3 * dir)) / 2e-3 - g);
        const double e2 = std::abs((V->value(u + 5e-4 * dir) - V->value(u - 5e-4 * dir)) / 1e-3 - g);
        // Second-order decay: halving h divides the error by about four.
        EXPECT_LT(e1, 1e-4);
        if (e1 > 1e-10) {
            EXPECT_LT(e2, 0.3 * e1);
        }
        const Vec hd = (V->gradient(u + 1e-5 * dir) - V->gradient(u - 1e-5 * dir)) / 2e-5;
        EXPECT_LT((V->hessian(u) * dir - hd).norm(), 1e-6);
    }
}

TEST(CriticalPoints, DoubleWellFullBox) {
    const auto pts = find_critical_points(*double_well(), Box{v1(-2), v1(2)}, 64);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_TRUE(has_point(pts, -1.0, PointClass::minimum));
    EXPECT_TRUE(has_point(pts, 0.0, PointClass::saddle));
    EXPECT_TRUE(has_point(pts, 1.0, PointClass::minimum));
}

TEST(CriticalPoints, CubicBistable) {
    const auto pts = find_critical_points(*cubic_bistable(0.25), Box{v1(-0.5), v1(1.5)}, 64);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_TRUE(has_point(pts, 0.0, PointClass::minimum));
    EXPECT_TRUE(has_point(pts, 0.25, PointClass::saddle));
    EXPECT_TRUE(has_point(pts, 1.0, PointClass::minimum));
}

TEST(CriticalPoints, HalfBoxFindsOneMinimum) {
    const auto pts = find_critical_points(*double_well(), Box{v1(0.5), v1(2)}, 64);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_TRUE(has_point(pts, 1.0, PointClass::minimum));
}

TEST(CriticalPoints, CoarseDensityIsRejected) {
    EXPECT_THROW(find_critical_points(*double_well(), Box{v1(-2), v1(2)}, 4), std::invalid_argument);
}

TEST(Spectral, DoubleWellEscapeDistance) {
    const auto s = spectral_constants(*double_well(), {v1(-1), v1(1)});
    EXPECT_NEAR(s.lambda_min, 2.0, 1e-12);
    EXPECT_NEAR(s.lambda_max, 2.0, 1e-12);
    EXPECT_NEAR(s.d_max, 1.0 - std::sqrt(2.0 / 3.0), 1e-4);
    EXPECT_NEAR(s.d_escape, 0.9 * s.d_max, 1e-12);
}

TEST(Spectral, CubicBistableBindsAtZero) {
    const auto s = spectral_constants(*cubic_bistable(0.25), {v1(0), v1(1)});
    EXPECT_NEAR(s.lambda_min, 0.25, 1e-12);
    EXPECT_NEAR(s.lambda_max, 0.75, 1e-12);
    // Root of 3u^2 - 2.5u + 0.125 = 0 nearest the origin.
    EXPECT_NEAR(s.d_max, (2.5 - std::sqrt(4.75)) / 6.0, 1e-4);
}

TEST(Spectral, QuadraticIsCapped) {
    const auto s = spectral_constants(*quadratic(1.0), {v1(0)}, 0.9, 1.0);
    EXPECT_TRUE(s.capped);
    EXPECT_DOUBLE_EQ(s.d_max, 1.0);
}

TEST(Hull, LowestQuotients) {
    const auto dw = lower_hull_constants(*double_well(), {v1(-1), v1(1)}, 3.0);
    EXPECT_NEAR(dw.q_low_hull, 0.0, 1e-6);
    EXPECT_DOUBLE_EQ(dw.lambda0, 1.0);
    const auto cb = lower_hull_constants(*cubic_bistable(0.25), {v1(0), v1(1)}, 3.0);
    EXPECT_NEAR(cb.q_low_hull, -7.0 / 144.0, 1e-6);
    EXPECT_DOUBLE_EQ(cb.lambda0, 1.0);
    const auto q = lower_hull_constants(*quadratic(1.0), {v1(0)}, 3.0);
    EXPECT_NEAR(q.q_low_hull, 0.5, 1e-12);
}

TEST(Coercivity, QuarticPotentialsHold) {
    const auto dw = check_coercivity(*double_well(), 10.0, 2000);
    EXPECT_TRUE(dw.holds);
    EXPECT_GT(dw.r_att_inf, 1.0);
    EXPECT_LT(dw.r_att_inf, 2.0);
    EXPECT_DOUBLE_EQ(dw.r_att_x, 2.0 * dw.r_att_inf);
    EXPECT_TRUE(check_coercivity(*cubic_bistable(0.25), 10.0, 2000).holds);
}

TEST(Coercivity, AntiCoercivePotentialFails) {
    const auto c = check_coercivity(*quadratic(-2.0), 10.0, 2000);
    EXPECT_FALSE(c.holds);
    ASSERT_EQ(c.witness.size(), 1);
    EXPECT_NE(c.witness[0], 0.0);
    EXPECT_THROW(build_catalog(quadratic(-2.0)), ConfigError);
}

TEST(Catalog, FirewallConstantsDoubleWell) {
    const Catalog c = build_catalog(double_well());
    EXPECT_NEAR(c.kappa0, 1.0, 1e-12);
    EXPECT_NEAR(c.nu_fire0, 0.25, 1e-12);
    EXPECT_NEAR(c.d_esc, 0.5 * c.d_escape, 1e-12);
    EXPECT_GT(c.k_fire0, 0.0);
    EXPECT_NEAR(c.hull_length, std::log(16 * c.k_fire0 / (c.nu_fire0 * c.d_esc * c.d_esc * c.kappa0)) / c.kappa0, 1e-12);
    EXPECT_NEAR(c.c_noesc, 8 * c.k_fire0 * c.hull_length / (c.kappa0 * c.d_esc * c.d_esc), 1e-9);
}

TEST(Catalog, FirewallConstantsCubicBistable) {
    const Catalog c = build_catalog(cubic_bistable(0.25));
    ASSERT_EQ(c.minima.size(), 2u);
    EXPECT_NEAR(c.kappa0, std::sqrt(0.125), 1e-12);
    EXPECT_NEAR(c.nu_fire0, 0.25 / 3.0, 1e-12);
    EXPECT_GT(c.dt_max(), 1e-3);
}

TEST(Catalog, EscapeBallProperties) {
    for (const auto& V : {double_well(), cubic_bistable(0.25)}) {
        const Catalog c = build_catalog(V);
        const auto a = audit_escape_ball(c);
        EXPECT_GE(a.eigen_lower, -1e-12) << V->name();
        EXPECT_GE(a.eigen_upper, -1e-12) << V->name();
        EXPECT_GE(a.value_lower, -1e-12) << V->name();
        EXPECT_GE(a.value_upper, -1e-12) << V->name();
        EXPECT_GE(a.slope_lower, -1e-12) << V->name();
        EXPECT_GE(a.slope_upper, -1e-12) << V->name();
        EXPECT_GE(a.weighted_energy, -1e-12) << V->name();
    }
}
