#include "helpers.hpp"
#include "rdlab/energy.hpp"
#include "rdlab/terrace.hpp"

#include <gtest/gtest.h>

using namespace rdlab;
using namespace rdlab::testing;

namespace {

const double kKinkEnergy = 2.0 * kSqrt2 / 3.0;

Trajectory run(const PotentialPtr& V, const FieldState& s0, double dt, double t_final, int stride,
               const std::vector<Observer>& obs = {}) {
    Stepper st(V, s0.grid, dt);
    EvolveOptions eo;
    eo.record_stride = stride;
    eo.max_snapshots = 100000;
    return evolve(s0, st, t_final, obs, eo);
}

double plateau(double x) { return 0.5 * (std::tanh(x + 10.0) - std::tanh(x - 10.0)); }

/// Relative dissipation residual of a CB plateau run at spacing dx.
double plateau_residual(double dx) {
    const auto V = cubic_bistable(0.25);
    const Grid g = Grid::make(40.0, dx);
    EnergySeries es;
    Stepper st(V, g, 1e-3);
    EvolveOptions eo;
    eo.record_stride = 1;
    eo.keep_snapshots = false;
    evolve(scalar_state(g, *V, plateau), st, 5.0, {energy_observer(es, *V, 0.0)}, eo);
    return dissipation_residual(es).max_rel;
}

/// Trapezoid of exp(log_value) on a fine mesh, used as an independent check of log_integral.
double quad(const PiecewiseExp& w, double lo, double hi) {
    const int n = 200000;
    const double h = (hi - lo) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) s += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(w.log_value(lo + i * h));
    return s * h;
}

}  // namespace

TEST(LabEnergy, ConstantMinimumHasZeroEnergy) {
    const auto V = double_well();
    const FieldState s = scalar_state(Grid::make(10.0, 0.1), *V, [](double) { return 1.0; });
    EXPECT_EQ(lab_energy(s, *V, 0.0), 0.0);
    EXPECT_EQ(lab_dissipation(s), 0.0);
}

TEST(LabEnergy, KinkEnergyConvergesToClosedForm) {
    const auto V = double_well();
    double prev = 1.0;
    for (double dx : {0.05, 0.025, 0.0125}) {
        const FieldState s = scalar_state(Grid::make(40.0, dx), *V, dw_kink);
        const double err = std::abs(lab_energy(s, *V, 0.0) - kKinkEnergy);
        EXPECT_LT(err, 0.3 * prev) << "dx = " << dx;
        prev = err;
    }
    EXPECT_LE(prev, 1e-4);
}

TEST(LabEnergy, HalfWindowCarriesHalfTheKink) {
    const auto V = double_well();
    const FieldState s = scalar_state(Grid::make(40.0, 0.0125), *V, dw_kink);
    EXPECT_NEAR(lab_energy(s, *V, 0.0, 0.0, 40.0), 0.5 * kKinkEnergy, 1e-4);
    EXPECT_NEAR(lab_energy(s, *V, 0.0, -40.0, 0.0), 0.5 * kKinkEnergy, 1e-4);
    EXPECT_EQ(lab_energy(s, *V, 0.0, 1.0, 1.0), 0.0);
    // The level shifts the energy by h times the window length.
    EXPECT_NEAR(lab_energy(s, *V, 0.5, 0.0, 10.0), lab_energy(s, *V, 0.0, 0.0, 10.0) - 5.0, 1e-10);
}

TEST(Dissipation, ConstantStateHasZeroResidual) {
    const auto V = double_well();
    EnergySeries es;
    run(V, scalar_state(Grid::make(10.0, 0.1), *V, [](double) { return -1.0; }), 1e-3, 1.0, 100,
        {energy_observer(es, *V, 0.0)});
    const auto r = dissipation_residual(es);
    EXPECT_LE(r.max_abs, 1e-13);
    EXPECT_EQ(r.intervals, static_cast<int>(es.t.size()) - 1);
}

TEST(Dissipation, StationaryKinkResidualIsTiny) {
    const auto V = double_well();
    EnergySeries es;
    run(V, scalar_state(Grid::make(30.0, 0.05), *V, dw_kink), 1e-3, 2.0, 10, {energy_observer(es, *V, 0.0)});
    // The sampled tanh relaxes to the discrete kink; only that O(dx^2) motion dissipates.
    EXPECT_LE(dissipation_residual(es, 0.5).max_abs, 1e-6);
}

TEST(Dissipation, PlateauResidualIsSecondOrder) {
    const double coarse = plateau_residual(0.05), fine = plateau_residual(0.025);
    EXPECT_LE(coarse, 5e-3);
    EXPECT_LE(fine, 5e-3);
    EXPECT_GE(coarse / fine, 3.5);
}

TEST(Dissipation, WindowSelectsIntervals) {
    EnergySeries es;
    es.t = {0, 1, 2, 3};
    es.E = {3, 2, 1, 0};
    es.D = {1, 1, 1, 1};
    EXPECT_EQ(dissipation_residual(es).max_abs, 0.0);
    EXPECT_EQ(dissipation_residual(es, 1.0, 2.0).intervals, 1);
    es.E[3] = 0.5;
    EXPECT_NEAR(dissipation_residual(es).max_abs, 0.5, 1e-15);
    EXPECT_NEAR(dissipation_residual(es).max_rel, 0.5 / 1.75, 1e-15);
}

TEST(LocalizedAudit, BumpWeightOnStationaryKink) {
    const auto V = double_well();
    double prev = 0.0;
    for (double dx : {0.05, 0.025}) {
        const Trajectory tr = run(V, scalar_state(Grid::make(20.0, dx), *V, dw_kink), 1e-3, 1.0, 10);
        const LocalizedAudit a = generic_weighted_derivative_audit(tr.states, *V, bump_weight(3.0), 0.0, 0.5);
        EXPECT_EQ(a.checks, static_cast<int>(tr.states.size()) - 2);
        EXPECT_LE(a.energy_residual, 1e-6);
        // The L2 identity moves a derivative onto the weight; its residual is the O(dx^2) quadrature error.
        EXPECT_LE(a.l2_residual, 1e-3);
        if (prev > 0.0) {
            EXPECT_GE(prev / a.l2_residual, 3.5);
        }
        prev = a.l2_residual;
    }
}

TEST(LocalizedAudit, KinkedWeightInMovingFrameConverges) {
    const auto V = cubic_bistable(0.25);
    double prev = 0.0;
    for (double dx : {0.05, 0.025}) {
        const Trajectory tr = run(V, scalar_state(Grid::make(30.0, dx), *V, cb_front), 1e-3, 2.0, 10);
        const LocalizedAudit a = generic_weighted_derivative_audit(tr.states, *V, exp_abs_weight(), 0.3, -1.0);
        const double r = std::max(a.energy_residual, a.l2_residual);
        EXPECT_LE(r, 1e-2) << "dx = " << dx;
        if (prev > 0.0) {
            EXPECT_LT(r, prev);
        }
        prev = r;
    }
}

TEST(LocalizedAudit, TooFewStatesIsEmpty) {
    const auto V = double_well();
    const FieldState s = scalar_state(Grid::make(5.0, 0.1), *V, dw_kink);
    EXPECT_EQ(generic_weighted_derivative_audit({s, s}, *V, bump_weight(1.0), 0.0, 0.0).checks, 0);
}

TEST(Firewall, UniformOffsetMatchesKernelIntegral) {
    const Catalog cat = build_catalog(double_well());
    const double X = 20.0, eps = 0.01;
    const FieldState s = scalar_state(Grid::make(X, 0.05), *cat.potential, [&](double) { return 1.0 + eps; });
    const double dv = std::pow((1.0 + eps) * (1.0 + eps) - 1.0, 2) / 4.0;
    const double f = cat.lambda0 * dv + 0.5 * eps * eps;
    const FirewallField F = firewall_lab(s, cat, v1(1.0));
    const double k0 = cat.kappa0;
    for (double xi : {-20.0, -7.5, 0.0, 12.5}) {
        const int j = static_cast<int>(std::lround(s.grid.index_of(xi)));
        const double oracle = f * (2.0 - std::exp(-k0 * (X + xi)) - std::exp(-k0 * (X - xi))) / k0;
        EXPECT_NEAR(F.F[j], oracle, 1e-3 * oracle) << "xi = " << xi;
        // Recursive and direct sums agree to rounding.
        EXPECT_NEAR(F.F[j], firewall_lab_at(s, cat, v1(1.0), xi), 1e-12 * oracle);
        EXPECT_EQ(F.P[j], 0.0);
    }
}

TEST(Firewall, VanishesAtTheMinimum) {
    const Catalog cat = build_catalog(double_well());
    const FieldState s = scalar_state(Grid::make(10.0, 0.1), *cat.potential, [](double) { return -1.0; });
    const FirewallField F = firewall_lab(s, cat, v1(-1.0));
    for (double v : F.F) EXPECT_EQ(v, 0.0);
}

TEST(Firewall, DecaysAwayFromALocalizedDefect) {
    const Catalog cat = build_catalog(double_well());
    const FieldState s = scalar_state(Grid::make(40.0, 0.05), *cat.potential,
                                      [](double x) { return 1.0 - 0.1 * std::exp(-x * x); });
    const FirewallField F = firewall_lab(s, cat, v1(1.0));
    const double f10 = F.F[s.grid.index_of(10.0)], f20 = F.F[s.grid.index_of(20.0)];
    EXPECT_NEAR(std::log(f10 / f20) / 10.0, cat.kappa0, 1e-3);
}

TEST(Firewall, LargeExcursionRaisesTheField) {
    const Catalog cat = build_catalog(double_well());
    const double A = 2.0 * cat.d_escape;
    const FieldState s = scalar_state(Grid::make(20.0, 0.05), *cat.potential,
                                      [&](double x) { return 1.0 - A * std::exp(-x * x); });
    EXPECT_GT(firewall_lab_at(s, cat, v1(1.0), 0.0), cat.d_esc * cat.d_esc);
    LabFirewallAuditor aud(cat, v1(1.0));
    aud.observe(s);
    EXPECT_GT(aud.result().implication_checks, 0);
    EXPECT_EQ(aud.result().counterexamples, 0);
}

TEST(Firewall, AuditorOnConstantRun) {
    const Catalog cat = build_catalog(double_well());
    LabFirewallAuditor aud(cat, v1(1.0));
    run(cat.potential, scalar_state(Grid::make(10.0, 0.1), *cat.potential, [](double) { return 1.0; }), 1e-3, 1.0,
        100, {[&](const FieldState& s) { aud.observe(s); }});
    const FirewallAudit r = aud.result();
    EXPECT_GT(r.checks, 0);
    EXPECT_EQ(r.violations, 0);
    EXPECT_TRUE(r.passes());
}

TEST(Firewall, AuditorOnCubicInvasion) {
    const Catalog cat = build_catalog(cubic_bistable(0.25));
    LabFirewallAuditor aud(cat, v1(0.0));
    run(cat.potential, scalar_state(Grid::make(40.0, 0.05), *cat.potential, plateau), 1e-3, 10.0, 50,
        {[&](const FieldState& s) { aud.observe(s); }});
    const FirewallAudit r = aud.result();
    EXPECT_GT(r.checks, 0);
    EXPECT_TRUE(r.passes()) << "worst excess " << r.worst_excess << " tol " << r.tol;
}

TEST(Weights, LogIntegralMatchesQuadrature) {
    const Catalog cat = build_catalog(cubic_bistable(0.25));
    const SchemeConstants k = scheme_constants(cat);
    const StandingWeights w = standing_weights(0.3, k, 2.0);
    EXPECT_NEAR(std::exp(w.chi.log_integral(-5.0, 5.0)), quad(w.chi, -5.0, 5.0), 1e-8);
    PiecewiseExp e;
    e.breaks = {0.0};
    e.a = {0.0, 0.0};
    e.b = {1.0, -2.0};
    e.a_t = {0.0, 0.0};
    // int e^{y} over (-inf, 0] plus int e^{-2y} over [0, inf).
    EXPECT_NEAR(e.log_integral(-detail::kInf, detail::kInf), std::log(1.5), 1e-15);
    EXPECT_NEAR(std::exp(e.log_integral(-1.0, 2.0)), quad(e, -1.0, 2.0), 1e-9);
    EXPECT_EQ(e.log_integral(3.0, 3.0), -detail::kInf);
    PiecewiseExp flat;
    flat.a = {0.0};
    flat.b = {0.0};
    flat.a_t = {0.0};
    EXPECT_EQ(flat.log_integral(0.0, detail::kInf), detail::kInf);
}

TEST(Weights, StandingWeightsAreContinuousWithConsistentTimeDerivative) {
    const Catalog cat = build_catalog(double_well());
    const SchemeConstants k = scheme_constants(cat);
    const double c = 0.2, t = 3.0, h = 1e-4;
    const StandingWeights w = standing_weights(c, k, t);
    const StandingWeights wp = standing_weights(c, k, t + h), wm = standing_weights(c, k, t - h);
    auto check = [&](const PiecewiseExp& a, const PiecewiseExp& ap, const PiecewiseExp& am) {
        for (double b : a.breaks) EXPECT_NEAR(a.log_value(b, -1), a.log_value(b, +1), 1e-12);
        for (std::size_t i = 0; i < a.a.size(); ++i) EXPECT_NEAR((ap.a[i] - am.a[i]) / (2 * h), a.a_t[i], 1e-8);
    };
    check(w.chi, wp.chi, wm.chi);
    check(w.psi_plus, wp.psi_plus, wm.psi_plus);
    check(w.psi_minus, wp.psi_minus, wm.psi_minus);
    // Inside the cut, chi moves with the frame: c chi - chi_y = 0.
    const double y = 0.3 * k.c_cut0 * t, dy = 1e-6;
    const double chi = std::exp(w.chi.log_value(y));
    const double chi_y = (std::exp(w.chi.log_value(y + dy)) - std::exp(w.chi.log_value(y - dy))) / (2 * dy);
    EXPECT_NEAR(c * chi - chi_y, 0.0, 1e-8);
}

TEST(Weights, TravelWeightsAreContinuousWithConsistentTimeDerivative) {
    const Catalog cat = build_catalog(cubic_bistable(0.25));
    const SchemeConstants k = scheme_constants(cat);
    WeightSpec spec;
    spec.c = 0.3;
    spec.ell = 2.0;
    const double s = 5.0, h = 1e-4;
    const auto [chi, psi] = travel_weights(spec, k, s);
    const auto [chip, psip] = travel_weights(spec, k, s + h);
    const auto [chim, psim] = travel_weights(spec, k, s - h);
    for (const auto* w : {&chi, &psi}) {
        const double b = w->breaks[0];
        EXPECT_NEAR(w->log_value(b, -1), w->log_value(b, +1), 1e-12);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR((chip.a[i] - chim.a[i]) / (2 * h), chi.a_t[i], 1e-8);
        EXPECT_NEAR((psip.a[i] - psim.a[i]) / (2 * h), psi.a_t[i], 1e-8);
    }
    // Behind the cut psi = e^{kappa (y - y0)} chi; ahead of it they coincide.
    const double y0 = spec.ell + k.c_cut * s;
    EXPECT_NEAR(psi.log_value(-1.0) - chi.log_value(-1.0), k.kappa * (-1.0 - y0), 1e-12);
    EXPECT_NEAR(psi.log_value(y0 + 3.0), chi.log_value(y0 + 3.0), 1e-12);
}

TEST(Weights, SchemeConstantsArePositive) {
    const SchemeConstants k = scheme_constants(build_catalog(cubic_bistable(0.25)));
    for (double v : {k.kappa, k.c_cut, k.Lambda, k.K_E, k.nu, k.K_F, k.c_cut0, k.nu_tilde}) EXPECT_GT(v, 0.0);
    EXPECT_LE(k.nu_tilde, k.nu);
    EXPECT_LE(k.c_cut0, k.c_cut);
}

TEST(StandingScheme, ConstantRunAtTheUpperState) {
    const Catalog cat = build_catalog(double_well());
    const SchemeConstants k = scheme_constants(cat);
    StandingScheme sch(cat, k, 0.0, v1(-1.0), v1(1.0));
    run(cat.potential, scalar_state(Grid::make(10.0, 0.1), *cat.potential, [](double) { return 1.0; }), 1e-3, 1.0,
        100, {[&](const FieldState& s) { sch.observe(s); }});
    const StandingSeries r = sch.finish();
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        EXPECT_LE(std::abs(r.E[i]), 1e-14);
        EXPECT_LE(r.F_plus[i], 1e-14);
        EXPECT_LE(r.D[i], 1e-20);
    }
    EXPECT_TRUE(r.passes());
    EXPECT_LE(std::abs(r.asymptotic_energy), 1e-14);
}

TEST(StandingScheme, KinkKeepsItsEnergy) {
    const Catalog cat = build_catalog(double_well());
    const SchemeConstants k = scheme_constants(cat);
    StandingScheme sch(cat, k, 0.0, v1(-1.0), v1(1.0));
    run(cat.potential, scalar_state(Grid::make(30.0, 0.025), *cat.potential, dw_kink), 1e-3, 5.0, 100,
        {[&](const FieldState& s) { sch.observe(s); }});
    const StandingSeries r = sch.finish();
    EXPECT_TRUE(r.passes());
    EXPECT_NEAR(r.E.front(), kKinkEnergy, 1e-3);
    EXPECT_NEAR(r.asymptotic_energy, kKinkEnergy, 1e-3);
    EXPECT_GE(r.asymptotic_energy, 0.0);
}

TEST(StandingTerrace, SumsProfileEnergies) {
    const auto V = double_well();
    const FrontProfile kink = solve_speed(*V, v1(-1.0), v1(1.0), -0.2, 0.2).profile;
    EXPECT_EQ(standing_terrace_energy({}, *V, 0.0), 0.0);
    EXPECT_NEAR(standing_terrace_energy({kink}, *V, 0.0), kKinkEnergy, 1e-6);
    EXPECT_NEAR(standing_terrace_energy({kink, mirror(kink)}, *V, 0.0), 2.0 * kKinkEnergy, 2e-6);
    EXPECT_THROW(standing_terrace_energy({kink}, *V, 0.1), std::invalid_argument);
    const auto cb = cubic_bistable(0.25);
    const FrontProfile moving = solve_speed(*cb, v1(1.0), v1(0.0), 0.01, 1.0).profile;
    EXPECT_THROW(standing_terrace_energy({moving}, *cb, 0.0), std::invalid_argument);
}
