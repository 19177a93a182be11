/// @file energy.hpp
/// Energy bookkeeping on solver states: lab-frame energy and dissipation,
/// localized-derivative identities, the lab firewall field, and the weighted
/// travelling and standing functionals with their inequality audits.
#pragma once

#include "rdlab/catalog.hpp"
#include "rdlab/front.hpp"
#include "rdlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace rdlab {

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
/// Relative weights below e^-36.8 (about 1e-16) are dropped.
constexpr double kLogClip = -36.8;

/// |u_x|^2/2 + V(u) - level at every node.
inline std::vector<double> energy_density(const FieldState& s, const Potential& V, double level) {
    const int N = s.grid.N, n = s.n;
    std::vector<double> e(N);
    for (int j = 0; j < N; ++j) {
        double g = 0.0;
        for (int k = 0; k < n; ++k) g += s.ux[j * n + k] * s.ux[j * n + k];
        e[j] = 0.5 * g + V.value(&s.u[j * n]) - level;
    }
    return e;
}

inline double dot_at(const std::vector<double>& a, const std::vector<double>& b, int j, int n) {
    double r = 0.0;
    for (int k = 0; k < n; ++k) r += a[j * n + k] * b[j * n + k];
    return r;
}

inline double dist2_at(const FieldState& s, int j, const Vec& m) {
    double r = 0.0;
    for (int k = 0; k < s.n; ++k) {
        const double d = s.u[j * s.n + k] - m[k];
        r += d * d;
    }
    return r;
}

/// Trapezoid of f(x) g(x) over the grid where g may have kinks. Cells that
/// contain a kink are split there, f is interpolated linearly and g is
/// evaluated with one-sided limits. g(x, side) with side -1/+1 for the
/// left/right limit.
template <class G>
double kinked_trapezoid(const Grid& grid, const std::vector<double>& f, G&& g, std::vector<double> kinks) {
    std::sort(kinks.begin(), kinks.end());
    double sum = 0.0;
    std::size_t ki = 0;
    for (int j = 0; j + 1 < grid.N; ++j) {
        const double a = grid.x(j), b = grid.x(j + 1);
        while (ki < kinks.size() && kinks[ki] <= a) ++ki;
        double lo = a, flo = f[j];
        double glo = g(a, +1);
        std::size_t kk = ki;
        while (kk < kinks.size() && kinks[kk] < b) {
            const double xk = kinks[kk];
            const double fk = f[j] + (f[j + 1] - f[j]) * (xk - a) / (b - a);
            sum += 0.5 * (xk - lo) * (flo * glo + fk * g(xk, -1));
            lo = xk;
            flo = fk;
            glo = g(xk, +1);
            ++kk;
        }
        sum += 0.5 * (b - lo) * (flo * glo + f[j + 1] * g(b, -1));
    }
    return sum;
}

/// Intervals (in x) where |u - m| > d, endpoints by linear interpolation.
inline std::vector<std::pair<double, double>> escape_set(const FieldState& s, const Vec& m, double d) {
    const Grid& gr = s.grid;
    std::vector<double> g(gr.N);
    for (int j = 0; j < gr.N; ++j) g[j] = std::sqrt(dist2_at(s, j, m)) - d;
    std::vector<std::pair<double, double>> out;
    double start = 0.0;
    bool in = g[0] > 0.0;
    if (in) start = gr.x(0);
    for (int j = 1; j < gr.N; ++j) {
        const bool now = g[j] > 0.0;
        if (now == in) continue;
        const double r = g[j - 1] / (g[j - 1] - g[j]);
        const double x = gr.x(j - 1) + r * gr.dx;
        if (now) start = x;
        else out.emplace_back(start, x);
        in = now;
    }
    if (in) out.emplace_back(start, gr.x(gr.N - 1));
    return out;
}

/// Integral of e^{-kappa |x - xi|} over [a, b].
inline double exp_kernel_integral(double a, double b, double xi, double kappa) {
    auto prim = [&](double x) {
        // Antiderivative, continuous at xi.
        return x <= xi ? std::exp(-kappa * (xi - x)) / kappa : (2.0 - std::exp(-kappa * (x - xi))) / kappa;
    };
    return prim(b) - prim(a);
}

inline double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

// ---------------------------------------------------------------- lab energy

/// Energy integral of (|u_x|^2/2 + V(u) - h) over [a, b] clipped to the grid.
/// Partial end cells use linear interpolation of the density.
inline double lab_energy(const FieldState& s, const Potential& V, double h, double a = -detail::kInf,
                         double b = detail::kInf) {
    const Grid& gr = s.grid;
    a = std::max(a, gr.x(0));
    b = std::min(b, gr.x(gr.N - 1));
    if (!(b > a)) return 0.0;
    const auto e = detail::energy_density(s, V, h);
    double sum = 0.0;
    for (int j = 0; j + 1 < gr.N; ++j) {
        const double x0 = gr.x(j), x1 = gr.x(j + 1);
        const double lo = std::max(a, x0), hi = std::min(b, x1);
        if (!(hi > lo)) continue;
        auto at = [&](double x) { return e[j] + (e[j + 1] - e[j]) * (x - x0) / gr.dx; };
        sum += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    return sum;
}

/// Integral of |u_t|^2 over the whole grid.
inline double lab_dissipation(const FieldState& s) {
    double sum = 0.0;
    for (int j = 0; j < s.grid.N; ++j) sum += s.grid.w(j) * detail::dot_at(s.ut, s.ut, j, s.n);
    return sum * s.grid.dx;
}

struct EnergySeries {
    std::vector<double> t, E, D;
};

/// Appends (t, E, int |u_t|^2) on every call.
inline Observer energy_observer(EnergySeries& out, const Potential& V, double h) {
    return [&out, &V, h](const FieldState& s) {
        out.t.push_back(s.t);
        out.E.push_back(lab_energy(s, V, h));
        out.D.push_back(lab_dissipation(s));
    };
}

struct DissipationResidual {
    double max_abs = 0.0;
    /// max |residual| / (1 + |E|).
    double max_rel = 0.0;
    int intervals = 0;
};

/// Residual of dE/dt + int |u_t|^2 = 0 on each recorded interval inside
/// [t0, t1]: difference quotient of E against the trapezoid mean of D.
inline DissipationResidual dissipation_residual(const EnergySeries& s, double t0 = -detail::kInf,
                                                double t1 = detail::kInf) {
    DissipationResidual r;
    for (std::size_t k = 1; k < s.t.size(); ++k) {
        if (s.t[k - 1] < t0 - 1e-12 || s.t[k] > t1 + 1e-12) continue;
        const double dt = s.t[k] - s.t[k - 1];
        const double res = std::abs((s.E[k] - s.E[k - 1]) / dt + 0.5 * (s.D[k] + s.D[k - 1]));
        r.max_abs = std::max(r.max_abs, res);
        r.max_rel = std::max(r.max_rel, res / (1.0 + std::abs(0.5 * (s.E[k] + s.E[k - 1]))));
        ++r.intervals;
    }
    return r;
}

// ------------------------------------------------ localized-derivative audit

/// Weight psi(y, t) for the localized identities, with derivatives and the
/// jump points of psi_y (which carry a Dirac part of psi_yy).
struct TestWeight {
    std::function<double(double, double)> psi, psi_t, psi_y, psi_yy;
    /// (y, jump of psi_y) at time t.
    std::function<std::vector<std::pair<double, double>>(double)> kinks;
};

/// psi = e^{-|y|}.
inline TestWeight exp_abs_weight() {
    TestWeight w;
    w.psi = [](double y, double) { return std::exp(-std::abs(y)); };
    w.psi_t = [](double, double) { return 0.0; };
    w.psi_y = [](double y, double) { return y > 0 ? -std::exp(-y) : (y < 0 ? std::exp(y) : 0.0); };
    w.psi_yy = [](double y, double) { return std::exp(-std::abs(y)); };
    w.kinks = [](double) { return std::vector<std::pair<double, double>>{{0.0, -2.0}}; };
    return w;
}

/// Smooth compact bump (1 - (y/r)^2)^4 on |y| < r.
inline TestWeight bump_weight(double r) {
    TestWeight w;
    w.psi = [r](double y, double) {
        const double z = 1.0 - (y / r) * (y / r);
        return z > 0 ? z * z * z * z : 0.0;
    };
    w.psi_t = [](double, double) { return 0.0; };
    w.psi_y = [r](double y, double) {
        const double z = 1.0 - (y / r) * (y / r);
        return z > 0 ? -8.0 * y / (r * r) * z * z * z : 0.0;
    };
    w.psi_yy = [r](double y, double) {
        const double q = y / r, z = 1.0 - q * q;
        return z > 0 ? (-8.0 / (r * r)) * z * z * z + 48.0 * q * q / (r * r) * z * z : 0.0;
    };
    w.kinks = [](double) { return std::vector<std::pair<double, double>>{}; };
    return w;
}

struct LocalizedAudit {
    double energy_residual = 0.0;
    double l2_residual = 0.0;
    int checks = 0;
};

/// Compare the centered time difference of int psi e and int psi |v|^2/2 in
/// the frame y = x - x0 - c t with the right-hand sides of the localized
/// identities. `states` are consecutive, equally spaced records.
inline LocalizedAudit generic_weighted_derivative_audit(const std::vector<FieldState>& states,
                                                        const Potential& V, const TestWeight& w, double c,
                                                        double x0) {
    LocalizedAudit a;
    if (states.size() < 3) return a;
    const Grid& gr = states.front().grid;
    const int n = states.front().n;
    auto kinks_x = [&](double t) {
        std::vector<double> k;
        for (auto& p : w.kinks(t)) k.push_back(p.first + x0 + c * t);
        return k;
    };
    auto weighted = [&](const FieldState& s, const std::vector<double>& f,
                        const std::function<double(double, double)>& g) {
        const double t = s.t;
        auto gx = [&](double x, int side) {
            const double y = x - x0 - c * t;
            return g(y + side * 1e-13 * std::max(1.0, std::abs(y)), t);
        };
        return detail::kinked_trapezoid(gr, f, gx, kinks_x(t));
    };
    auto functionals = [&](const FieldState& s) {
        const auto e = detail::energy_density(s, V, 0.0);
        std::vector<double> q(gr.N);
        for (int j = 0; j < gr.N; ++j) q[j] = 0.5 * detail::dot_at(s.u, s.u, j, n);
        return std::make_pair(weighted(s, e, w.psi), weighted(s, q, w.psi));
    };
    std::vector<std::pair<double, double>> vals;
    for (const auto& s : states) vals.push_back(functionals(s));
    for (std::size_t k = 1; k + 1 < states.size(); ++k) {
        const FieldState& s = states[k];
        const double t = s.t;
        const double h = states[k + 1].t - states[k - 1].t;
        const double dE = (vals[k + 1].first - vals[k - 1].first) / h;
        const double dQ = (vals[k + 1].second - vals[k - 1].second) / h;
        const auto e = detail::energy_density(s, V, 0.0);
        std::vector<double> vt2(gr.N), vyvt(gr.N), q(gr.N), src(gr.N);
        Vec g(n);
        for (int j = 0; j < gr.N; ++j) {
            double a2 = 0.0, b = 0.0, uy2 = 0.0, ug = 0.0;
            V.gradient(&s.u[j * n], g.data());
            for (int i = 0; i < n; ++i) {
                const double ux = s.ux[j * n + i];
                const double vt = s.ut[j * n + i] + c * ux;
                a2 += vt * vt;
                b += ux * vt;
                uy2 += ux * ux;
                ug += s.u[j * n + i] * g[i];
            }
            vt2[j] = a2;
            vyvt[j] = b;
            q[j] = 0.5 * detail::dot_at(s.u, s.u, j, n);
            src[j] = -ug - uy2;
        }
        const auto cross = [&](double y, double tt) { return c * w.psi(y, tt) - w.psi_y(y, tt); };
        const auto neg = [&](double y, double tt) { return -w.psi(y, tt); };
        const double rhsE = weighted(s, vt2, neg) + weighted(s, e, w.psi_t) + weighted(s, vyvt, cross);
        const auto l2w = [&](double y, double tt) { return w.psi_t(y, tt) + w.psi_yy(y, tt) - c * w.psi_y(y, tt); };
        double rhsQ = weighted(s, src, w.psi) + weighted(s, q, l2w);
        for (auto& p : w.kinks(t)) {
            const double xk = p.first + x0 + c * t;
            const double fi = gr.index_of(xk);
            if (fi < 0 || fi > gr.N - 1) continue;
            const int j = std::min(gr.N - 2, static_cast<int>(std::floor(fi)));
            const double r = fi - j;
            rhsQ += p.second * (q[j] + r * (q[j + 1] - q[j]));
        }
        a.energy_residual = std::max(a.energy_residual, std::abs(dE - rhsE));
        a.l2_residual = std::max(a.l2_residual, std::abs(dQ - rhsQ));
        ++a.checks;
    }
    return a;
}

// ------------------------------------------------------------ lab firewall

struct FirewallField {
    double t = 0.0;
    /// F_0(xi_j) at every node and the pollution integral over the escape set.
    std::vector<double> F, P;
};

/// Lab firewall centered at the minimum m for every node xi_j, by a two-pass
/// exponential recursion (exact trapezoid of the kernel sum).
inline FirewallField firewall_lab(const FieldState& s, const Catalog& c, const Vec& m) {
    const Potential& V = *c.potential;
    const Grid& gr = s.grid;
    const int N = gr.N;
    const double vm = V.value(m), k0 = c.kappa0, L0 = c.lambda0;
    std::vector<double> f(N);
    for (int j = 0; j < N; ++j) {
        const double ux2 = detail::dot_at(s.ux, s.ux, j, s.n);
        f[j] = gr.w(j) * (L0 * (0.5 * ux2 + V.value(&s.u[j * s.n]) - vm) + 0.5 * detail::dist2_at(s, j, m));
    }
    const double q = std::exp(-k0 * gr.dx);
    std::vector<double> left(N), right(N);
    left[0] = f[0];
    for (int j = 1; j < N; ++j) left[j] = left[j - 1] * q + f[j];
    right[N - 1] = f[N - 1];
    for (int j = N - 2; j >= 0; --j) right[j] = right[j + 1] * q + f[j];
    FirewallField out;
    out.t = s.t;
    out.F.resize(N);
    out.P.assign(N, 0.0);
    for (int j = 0; j < N; ++j) out.F[j] = gr.dx * (left[j] + right[j] - f[j]);
    const auto sigma = detail::escape_set(s, m, c.d_escape);
    for (int j = 0; j < N; ++j)
        for (const auto& iv : sigma) out.P[j] += detail::exp_kernel_integral(iv.first, iv.second, gr.x(j), k0);
    return out;
}

/// Single-point lab firewall by direct summation.
inline double firewall_lab_at(const FieldState& s, const Catalog& c, const Vec& m, double xi) {
    const Potential& V = *c.potential;
    const Grid& gr = s.grid;
    const double vm = V.value(m);
    double sum = 0.0;
    for (int j = 0; j < gr.N; ++j) {
        const double ux2 = detail::dot_at(s.ux, s.ux, j, s.n);
        const double f = c.lambda0 * (0.5 * ux2 + V.value(&s.u[j * s.n]) - vm) + 0.5 * detail::dist2_at(s, j, m);
        sum += gr.w(j) * std::exp(-c.kappa0 * std::abs(gr.x(j) - xi)) * f;
    }
    return sum * gr.dx;
}

struct FirewallAudit {
    /// Decrease inequality dF/dt <= -nu F + K P, checked at every node and
    /// every interior record.
    long checks = 0;
    long violations = 0;
    double worst_excess = -detail::kInf;
    double max_F = 0.0;
    double tol = 0.0;
    /// Implication F <= d_esc^2 => |u - m| <= d_Esc.
    long implication_checks = 0;
    long counterexamples = 0;
    bool passes() const { return worst_excess <= tol && counterexamples == 0; }
};

/// Streaming auditor for the lab firewall. Feed records in time order;
/// derivatives are centered differences across three consecutive records.
class LabFirewallAuditor {
public:
    LabFirewallAuditor(const Catalog& c, Vec m, double rel_tol = 1e-3) : c_(c), m_(std::move(m)), rel_tol_(rel_tol) {}

    void observe(const FieldState& s) {
        FirewallField f = firewall_lab(s, c_, m_);
        const double d2 = c_.d_esc * c_.d_esc;
        for (int j = 0; j < s.grid.N; ++j) {
            audit_.max_F = std::max(audit_.max_F, f.F[j]);
            if (f.F[j] <= d2) {
                ++audit_.implication_checks;
                if (std::sqrt(detail::dist2_at(s, j, m_)) > c_.d_escape) ++audit_.counterexamples;
            }
        }
        hist_.push_back(std::move(f));
        if (hist_.size() > 3) hist_.erase(hist_.begin());
        if (hist_.size() < 3) return;
        const auto &a = hist_[0], &b = hist_[1], &e = hist_[2];
        const double h = e.t - a.t;
        const double tol = rel_tol_ * std::max(1.0, audit_.max_F);
        for (std::size_t j = 0; j < b.F.size(); ++j) {
            const double lhs = (e.F[j] - a.F[j]) / h;
            const double rhs = -c_.nu_fire0 * b.F[j] + c_.k_fire0 * b.P[j];
            const double ex = lhs - rhs;
            audit_.worst_excess = std::max(audit_.worst_excess, ex);
            ++audit_.checks;
            if (ex > tol) ++audit_.violations;
        }
    }

    FirewallAudit result() const {
        FirewallAudit r = audit_;
        r.tol = rel_tol_ * std::max(1.0, r.max_F);
        return r;
    }

private:
    const Catalog& c_;
    Vec m_;
    double rel_tol_;
    std::vector<FirewallField> hist_;
    FirewallAudit audit_;
};

// ------------------------------------------------------ weighted functionals

/// Continuous weight with log psi piecewise linear in y: log psi = a_i + b_i y
/// on piece i; pieces are separated by ascending breakpoints. a_t is the time
/// derivative of a_i (b is time independent for the weights used here).
struct PiecewiseExp {
    std::vector<double> breaks, a, b, a_t;

    int piece(double y, int side) const {
        int i = 0;
        while (i < static_cast<int>(breaks.size()) && (side < 0 ? y > breaks[i] : y >= breaks[i])) ++i;
        return i;
    }
    double log_value(double y, int side = 0) const {
        const int i = piece(y, side);
        return a[i] + b[i] * y;
    }
    /// log of the integral over [lo, hi] (either end may be infinite).
    double log_integral(double lo, double hi) const {
        double acc = -detail::kInf;
        const int P = static_cast<int>(a.size());
        for (int i = 0; i < P; ++i) {
            const double pl = i == 0 ? -detail::kInf : breaks[i - 1];
            const double ph = i == P - 1 ? detail::kInf : breaks[i];
            const double l = std::max(lo, pl), h = std::min(hi, ph);
            if (!(h > l)) continue;
            double term;
            if (b[i] == 0.0) {
                if (std::isinf(h - l)) return detail::kInf;
                term = a[i] + std::log(h - l);
            } else if (b[i] > 0.0) {
                if (std::isinf(h)) return detail::kInf;
                // e^{a+bh}(1 - e^{-b(h-l)})/b
                term = a[i] + b[i] * h + std::log(-std::expm1(-b[i] * (h - l))) - std::log(b[i]);
            } else {
                if (std::isinf(l)) return detail::kInf;
                term = a[i] + b[i] * l + std::log(-std::expm1(b[i] * (h - l))) - std::log(-b[i]);
            }
            acc = detail::log_add(acc, term);
        }
        return acc;
    }
};

/// Constants of the weighted schemes derived from the catalog.
struct SchemeConstants {
    double kappa = 0.0, c_cut = 0.0, Lambda = 0.0;
    double K_E = 0.0, nu = 0.0, K_F = 0.0, K_D = 0.0;
    /// Standing variant.
    double c_cut0 = 0.0, nu_tilde = 0.0;
};

inline SchemeConstants scheme_constants(const Catalog& c, double density = 32.0) {
    SchemeConstants k;
    const double cn = c.c_noesc, lmin = c.lambda_min, lmax = c.lambda_max;
    k.kappa = std::min(1.0, lmin / (8.0 * (cn + 1.0)));
    k.c_cut = std::min(lmin / (8.0 * lmax), lmin / (8.0 * (cn + 1.0)));
    k.Lambda = std::min(c.lambda0, 1.0 / ((cn + 1.0) * (cn + 1.0)));
    const double ck = cn + k.kappa;
    k.K_E = (k.c_cut * ck + ck * ck) / k.Lambda;
    k.nu = std::min(1.0 / k.Lambda, lmin / (4.0 * (k.Lambda * lmax + 0.5)));
    const Potential& V = *c.potential;
    const int n = V.dim();
    const double radius = c.r_att_inf + c.max_min_norm();
    double kf = -detail::kInf;
    for (const Vec& m : c.minima) {
        const double vm = V.value(m);
        auto g = [&](const Vec& v) {
            const Vec u = m + v;
            const double dv = V.value(u) - vm;
            return k.nu * (k.Lambda * dv + 0.5 * v.squaredNorm()) - v.dot(V.gradient(u)) +
                   lmin / (8.0 * lmax) * std::abs(dv) + lmin / 8.0 * v.squaredNorm();
        };
        kf = std::max(kf, detail::maximize_over_ball(g, Vec::Zero(n), radius, density).first);
    }
    k.K_F = kf;
    const double neg_min_eig = detail::maximize_over_ball(
        [&](const Vec& u) { return -sorted_eigenvalues(V, u).minCoeff(); }, Vec::Zero(n), c.r_att_inf, density).first;
    k.K_D = k.c_cut * ck + 2.0 * neg_min_eig + 0.5 * ck * ck;
    const double c_hom = cn + 1.0;
    k.c_cut0 = std::min({k.c_cut, c_hom / 2.0, c_hom / 2.0});
    k.nu_tilde = std::min(k.nu, k.kappa * k.c_cut0 / 4.0);
    return k;
}

namespace detail {

/// Integral of f times exp(log_w - shift) over the grid, y = x - origin.
inline double weighted_sum(const Grid& gr, const std::vector<double>& f, const PiecewiseExp& w, double origin,
                           double shift) {
    auto g = [&](double x, int side) {
        const double lw = w.log_value(x - origin, side) - shift;
        return lw < kLogClip ? 0.0 : std::exp(lw);
    };
    std::vector<double> k;
    for (double b : w.breaks) k.push_back(b + origin);
    return kinked_trapezoid(gr, f, g, k);
}

/// Integral of exp(log_w - shift) over the escape intervals (given in x).
inline double weight_over_set(const std::vector<std::pair<double, double>>& set, const PiecewiseExp& w,
                              double origin, double shift) {
    double acc = 0.0;
    for (const auto& iv : set) {
        const double li = w.log_integral(iv.first - origin, iv.second - origin);
        if (li - shift > kLogClip) acc += std::exp(li - shift);
    }
    return acc;
}

inline double trapz_step(double f0, double f1, double h) { return 0.5 * h * (f0 + f1); }

}  // namespace detail

/// Parameters of one travelling weight: frame speed, cut offset, start time,
/// and the minimum the frame is centered on.
struct WeightSpec {
    double c = 0.0;
    double ell = 0.0;
    double t_init = 0.0;
    /// Frame origin; NaN means "escape point at t_init".
    double x_init = std::numeric_limits<double>::quiet_NaN();
    double s_fin = 0.0;
    Vec m;
};

/// chi and psi of the travelling scheme at time s.
inline std::pair<PiecewiseExp, PiecewiseExp> travel_weights(const WeightSpec& w, const SchemeConstants& k, double s) {
    const double c = w.c, kap = k.kappa;
    const double y0 = w.ell + k.c_cut * s;
    PiecewiseExp chi, psi;
    chi.breaks = {y0};
    chi.a = {0.0, (c + kap) * y0};
    chi.b = {c, -kap};
    chi.a_t = {0.0, (c + kap) * k.c_cut};
    psi.breaks = {y0};
    psi.a = {-kap * y0, (c + kap) * y0};
    psi.b = {c + kap, -kap};
    psi.a_t = {-kap * k.c_cut, (c + kap) * k.c_cut};
    return {chi, psi};
}

struct SchemeSeries {
    WeightSpec spec;
    SchemeConstants k;
    /// Every functional is multiplied by e^{-log_shift}.
    double log_shift = 0.0;
    std::vector<double> s, E, D, F, G, G_back, G_front, y_esc, y_hom;
    std::vector<double> residual_energy_ineq, residual_firewall_ineq, residual_final;
    double log_K_u0 = detail::kInf;
    double scale = 1.0, tol = 0.0;
    bool energy_ineq_ok = false, firewall_ineq_ok = false, final_ok = false;
    bool g_back_ok = false, dissipation_growth_ok = false;
    bool passes() const { return energy_ineq_ok && firewall_ineq_ok && final_ok && g_back_ok && dissipation_growth_ok; }
};

/// Streaming evaluator of the travelling-frame functionals
/// v(y, s) = u(x_init + c s + y, t_init + s).
class TravelScheme {
public:
    TravelScheme(const Catalog& cat, const SchemeConstants& k, WeightSpec spec) : cat_(cat) {
        out_.spec = std::move(spec);
        out_.k = k;
        // Largest log weight over the run sits at the cut, c (ell + c_cut s).
        out_.log_shift = std::max(0.0, out_.spec.c * (out_.spec.ell + k.c_cut * out_.spec.s_fin));
    }

    /// Feed a record at lab time t with the escape and homogeneous markers.
    void observe(const FieldState& st, double x_esc, double x_hom) {
        WeightSpec& w = out_.spec;
        if (st.t < w.t_init - 1e-9) return;
        if (std::isnan(w.x_init)) {
            if (!std::isfinite(x_esc)) return;
            w.x_init = x_esc;
            w.t_init = st.t;
        }
        const Potential& V = *cat_.potential;
        const SchemeConstants& k = out_.k;
        const double s = st.t - w.t_init;
        const double origin = w.x_init + w.c * s;
        const auto [chi, psi] = travel_weights(w, k, s);
        const Grid& gr = st.grid;
        const int n = st.n;
        const double vm = V.value(w.m);
        std::vector<double> e(gr.N), d(gr.N), f(gr.N);
        for (int j = 0; j < gr.N; ++j) {
            const double ux2 = detail::dot_at(st.ux, st.ux, j, n);
            e[j] = 0.5 * ux2 + V.value(&st.u[j * n]) - vm;
            double vs = 0.0;
            for (int i = 0; i < n; ++i) {
                const double q = st.ut[j * n + i] + w.c * st.ux[j * n + i];
                vs += q * q;
            }
            d[j] = vs;
            f[j] = k.Lambda * e[j] + 0.5 * detail::dist2_at(st, j, w.m);
        }
        const double sh = out_.log_shift;
        out_.s.push_back(s);
        out_.E.push_back(detail::weighted_sum(gr, e, chi, origin, sh));
        out_.D.push_back(detail::weighted_sum(gr, d, chi, origin, sh));
        out_.F.push_back(detail::weighted_sum(gr, f, psi, origin, sh));
        out_.G.push_back(detail::weight_over_set(detail::escape_set(st, w.m, cat_.d_escape), psi, origin, sh));
        const double ye = x_esc - origin, yh = x_hom - origin;
        out_.y_esc.push_back(ye);
        out_.y_hom.push_back(yh);
        out_.G_back.push_back(std::isfinite(ye) ? psi.log_integral(-detail::kInf, ye) : -detail::kInf);
        out_.G_front.push_back(std::isfinite(yh) ? psi.log_integral(yh, detail::kInf) : -detail::kInf);
    }

    /// Close the series: integrated inequalities and bound checks. beta_bar
    /// is the escape-track exponent entering K[u0].
    SchemeSeries finish(double beta_bar, double rel_tol = 1e-3) {
        SchemeSeries& o = out_;
        const SchemeConstants& k = o.k;
        const std::size_t K = o.s.size();
        o.log_K_u0 = beta_bar - std::log(k.kappa);
        double scale = 1.0, intD = 0.0;
        for (std::size_t i = 0; i < K; ++i) scale = std::max({scale, std::abs(o.E[i]), std::abs(o.F[i])});
        for (std::size_t i = 1; i < K; ++i) intD += detail::trapz_step(o.D[i - 1], o.D[i], o.s[i] - o.s[i - 1]);
        o.scale = std::max(scale, 0.5 * intD);
        o.tol = rel_tol * o.scale;
        o.energy_ineq_ok = o.firewall_ineq_ok = o.final_ok = o.g_back_ok = o.dissipation_growth_ok = K > 0;
        const double ck = cat_.c_noesc + k.kappa;
        const double log_KG_back = std::log(2.0 * k.K_E * k.K_F / (k.nu * k.kappa * k.c_cut)) + o.log_K_u0;
        double cumD = 0.0, cumF = 0.0, cumFire = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            if (i > 0) {
                const double h = o.s[i] - o.s[i - 1];
                cumD += detail::trapz_step(o.D[i - 1], o.D[i], h);
                cumF += detail::trapz_step(o.F[i - 1], o.F[i], h);
                cumFire += detail::trapz_step(-k.nu * o.F[i - 1] + k.K_F * o.G[i - 1], -k.nu * o.F[i] + k.K_F * o.G[i], h);
                if (o.D[i] > o.D[i - 1] * std::exp(std::min(700.0, k.K_D * h)) * (1.0 + rel_tol) + o.tol)
                    o.dissipation_growth_ok = false;
            }
            const double re = 0.5 * cumD - (o.E[0] - o.E[i] + k.K_E * cumF);
            const double rf = o.F[i] - o.F[0] - cumFire;
            o.residual_energy_ineq.push_back(re);
            o.residual_firewall_ineq.push_back(rf);
            if (re > o.tol) o.energy_ineq_ok = false;
            if (rf > o.tol) o.firewall_ineq_ok = false;
            // Final bound with s_fin = s_i; the flux terms live in log space.
            const double log_front = std::log(k.K_E * k.K_F / (k.nu * k.kappa * ck * (k.c_cut + k.kappa))) +
                                     ck * (k.c_cut + k.kappa) * o.s[i] + ck * o.spec.ell -
                                     k.kappa * o.y_hom.front();
            const double log_flux = detail::log_add(log_KG_back - k.kappa * o.spec.ell, log_front) - o.log_shift;
            const double rhs = o.E[0] - o.E[i] + k.K_E / k.nu * o.F[0] + (log_flux > 700 ? detail::kInf : std::exp(log_flux));
            const double rfin = 0.5 * cumD - rhs;
            o.residual_final.push_back(rfin);
            if (rfin > o.tol) o.final_ok = false;
            const double bound = o.log_K_u0 - k.kappa * o.spec.ell - 0.5 * k.kappa * k.c_cut * o.s[i];
            if (o.G_back[i] > bound + 1e-12 * std::max(1.0, std::abs(bound))) o.g_back_ok = false;
        }
        return o;
    }

    const SchemeSeries& series() const { return out_; }

private:
    const Catalog& cat_;
    SchemeSeries out_;
};

/// CSV: s, E, D, F, G_back, G_front, residual_energy_ineq, residual_firewall_ineq.
/// G_back and G_front are natural logs of the unshifted integrals.
inline void write_scheme_csv(std::ostream& os, const SchemeSeries& s) {
    os << "s,E,D,F,G_back,G_front,residual_energy_ineq,residual_firewall_ineq\n";
    for (std::size_t i = 0; i < s.s.size(); ++i)
        os << fmt17(s.s[i]) << "," << fmt17(s.E[i]) << "," << fmt17(s.D[i]) << "," << fmt17(s.F[i]) << ","
           << fmt17(s.G_back[i]) << "," << fmt17(s.G_front[i]) << "," << fmt17(s.residual_energy_ineq[i]) << ","
           << fmt17(s.residual_firewall_ineq[i]) << "\n";
}

// --------------------------------------------------------- standing scheme

/// chi, psi_+ and psi_- of the standing scheme at time t (cut at c_cut0 t).
struct StandingWeights {
    PiecewiseExp chi, psi_plus, psi_minus;
};

inline StandingWeights standing_weights(double c, const SchemeConstants& k, double t) {
    const double kap = k.kappa, p = k.c_cut0 * t, cc = k.c_cut0;
    StandingWeights w;
    w.chi.breaks = {-p, p};
    w.chi.a = {-c * p + kap * p, 0.0, (c + kap) * p};
    w.chi.b = {kap, c, -kap};
    w.chi.a_t = {cc * (kap - c), 0.0, (c + kap) * cc};
    w.psi_plus.breaks = {p};
    w.psi_plus.a = {c * p - kap * p, (c + kap) * p};
    w.psi_plus.b = {kap, -kap};
    w.psi_plus.a_t = {cc * (c - kap), (c + kap) * cc};
    w.psi_minus.breaks = {-p};
    w.psi_minus.a = {-c * p + kap * p, -c * p - kap * p};
    w.psi_minus.b = {kap, -kap};
    w.psi_minus.a_t = {cc * (kap - c), -cc * (c + kap)};
    return w;
}

struct StandingSeries {
    double c = 0.0, h = 0.0;
    Vec m_minus, m_plus;
    SchemeConstants k;
    std::vector<double> t, E, D, F_plus, F_minus, G_plus, G_minus;
    std::vector<double> residual_energy_ineq, residual_firewall_plus, residual_firewall_minus;
    /// Sharper form with the measured escape-set integral in place of its bound.
    std::vector<double> residual_local_plus, residual_local_minus;
    double K_F_init = 0.0, K_E_final = 0.0;
    double asymptotic_energy = 0.0;
    double scale = 1.0, tol = 0.0;
    bool energy_ineq_ok = false, firewall_ok = false, local_firewall_ok = false;
    bool passes() const { return energy_ineq_ok && firewall_ok && local_firewall_ok; }
};

/// Streaming evaluator of the standing-frame functionals v(y, t) = u(c t + y, t).
class StandingScheme {
public:
    StandingScheme(const Catalog& cat, const SchemeConstants& k, double c, Vec m_minus, Vec m_plus) : cat_(cat) {
        o_.c = c;
        o_.k = k;
        o_.m_minus = std::move(m_minus);
        o_.m_plus = std::move(m_plus);
        const Potential& V = *cat.potential;
        o_.h = std::max(V.value(o_.m_minus), V.value(o_.m_plus));
    }

    void observe(const FieldState& st) {
        const Potential& V = *cat_.potential;
        const Grid& gr = st.grid;
        const int n = st.n;
        const double t = st.t, origin = o_.c * t;
        const StandingWeights w = standing_weights(o_.c, o_.k, t);
        const double Lam = o_.k.Lambda;
        const double vp = V.value(o_.m_plus), vmi = V.value(o_.m_minus);
        std::vector<double> e(gr.N), d(gr.N), fp(gr.N), fm(gr.N);
        for (int j = 0; j < gr.N; ++j) {
            const double ux2 = detail::dot_at(st.ux, st.ux, j, n);
            const double v = V.value(&st.u[j * n]);
            e[j] = 0.5 * ux2 + v - o_.h;
            double vs = 0.0;
            for (int i = 0; i < n; ++i) {
                const double q = st.ut[j * n + i] + o_.c * st.ux[j * n + i];
                vs += q * q;
            }
            d[j] = vs;
            fp[j] = Lam * (0.5 * ux2 + v - vp) + 0.5 * detail::dist2_at(st, j, o_.m_plus);
            fm[j] = Lam * (0.5 * ux2 + v - vmi) + 0.5 * detail::dist2_at(st, j, o_.m_minus);
        }
        o_.t.push_back(t);
        o_.E.push_back(detail::weighted_sum(gr, e, w.chi, origin, 0.0));
        o_.D.push_back(detail::weighted_sum(gr, d, w.chi, origin, 0.0));
        o_.F_plus.push_back(detail::weighted_sum(gr, fp, w.psi_plus, origin, 0.0));
        o_.F_minus.push_back(detail::weighted_sum(gr, fm, w.psi_minus, origin, 0.0));
        o_.G_plus.push_back(detail::weight_over_set(detail::escape_set(st, o_.m_plus, cat_.d_escape), w.psi_plus, origin, 0.0));
        o_.G_minus.push_back(
            detail::weight_over_set(detail::escape_set(st, o_.m_minus, cat_.d_escape), w.psi_minus, origin, 0.0));
    }

    StandingSeries finish(double rel_tol = 1e-3) {
        StandingSeries& o = o_;
        const SchemeConstants& k = o.k;
        const std::size_t K = o.t.size();
        double scale = 1.0, intD = 0.0;
        for (std::size_t i = 0; i < K; ++i)
            scale = std::max({scale, std::abs(o.E[i]), std::abs(o.F_plus[i]), std::abs(o.F_minus[i])});
        for (std::size_t i = 1; i < K; ++i) intD += detail::trapz_step(o.D[i - 1], o.D[i], o.t[i] - o.t[i - 1]);
        o.scale = std::max(scale, 0.5 * intD);
        o.tol = rel_tol * o.scale;
        o.energy_ineq_ok = o.firewall_ok = o.local_firewall_ok = K > 0;
        if (K == 0) return o;
        o.K_F_init = std::max(o.F_plus[0], o.F_minus[0]);
        const double src = 2.0 * k.K_F / k.kappa;
        o.K_E_final = 2.0 * k.K_E * (o.K_F_init + 4.0 * k.K_F / (k.kappa * k.kappa * k.c_cut0));
        double accE = 0.0, accP = 0.0, accM = 0.0, accLP = 0.0, accLM = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            if (i > 0) {
                const double h = o.t[i] - o.t[i - 1];
                const double t0 = o.t[i - 1], t1 = o.t[i];
                auto bnd = [&](double t) { return src * std::exp(-0.5 * k.kappa * k.c_cut0 * t); };
                accE += detail::trapz_step(-0.5 * o.D[i - 1] + o.K_E_final * std::exp(-k.nu_tilde * t0),
                                           -0.5 * o.D[i] + o.K_E_final * std::exp(-k.nu_tilde * t1), h);
                accP += detail::trapz_step(-k.nu * o.F_plus[i - 1] + bnd(t0), -k.nu * o.F_plus[i] + bnd(t1), h);
                accM += detail::trapz_step(-k.nu * o.F_minus[i - 1] + bnd(t0), -k.nu * o.F_minus[i] + bnd(t1), h);
                accLP += detail::trapz_step(-k.nu * o.F_plus[i - 1] + k.K_F * o.G_plus[i - 1],
                                            -k.nu * o.F_plus[i] + k.K_F * o.G_plus[i], h);
                accLM += detail::trapz_step(-k.nu * o.F_minus[i - 1] + k.K_F * o.G_minus[i - 1],
                                            -k.nu * o.F_minus[i] + k.K_F * o.G_minus[i], h);
            }
            o.residual_energy_ineq.push_back(o.E[i] - o.E[0] - accE);
            o.residual_firewall_plus.push_back(o.F_plus[i] - o.F_plus[0] - accP);
            o.residual_firewall_minus.push_back(o.F_minus[i] - o.F_minus[0] - accM);
            o.residual_local_plus.push_back(o.F_plus[i] - o.F_plus[0] - accLP);
            o.residual_local_minus.push_back(o.F_minus[i] - o.F_minus[0] - accLM);
            if (o.residual_energy_ineq.back() > o.tol) o.energy_ineq_ok = false;
            if (std::max(o.residual_firewall_plus.back(), o.residual_firewall_minus.back()) > o.tol)
                o.firewall_ok = false;
            if (std::max(o.residual_local_plus.back(), o.residual_local_minus.back()) > o.tol)
                o.local_firewall_ok = false;
        }
        // Trailing-quarter infimum stands in for the limit inferior.
        const std::size_t from = K - std::max<std::size_t>(1, K / 4);
        o.asymptotic_energy = *std::min_element(o.E.begin() + static_cast<long>(from), o.E.end());
        return o;
    }

    const StandingSeries& series() const { return o_; }

private:
    const Catalog& cat_;
    StandingSeries o_;
};

/// CSV: t, E, D, F_plus, F_minus, residual_energy_ineq, residual_firewall_plus, residual_firewall_minus.
inline void write_standing_csv(std::ostream& os, const StandingSeries& s) {
    os << "t,E,D,F_plus,F_minus,residual_energy_ineq,residual_firewall_plus,residual_firewall_minus\n";
    for (std::size_t i = 0; i < s.t.size(); ++i)
        os << fmt17(s.t[i]) << "," << fmt17(s.E[i]) << "," << fmt17(s.D[i]) << "," << fmt17(s.F_plus[i]) << ","
           << fmt17(s.F_minus[i]) << "," << fmt17(s.residual_energy_ineq[i]) << ","
           << fmt17(s.residual_firewall_plus[i]) << "," << fmt17(s.residual_firewall_minus[i]) << "\n";
}

/// Sum of the unweighted energies of standing profiles at level h. Every
/// profile must have zero speed and both endpoints at level h.
inline double standing_terrace_energy(const std::vector<FrontProfile>& profiles, const Potential& V, double h,
                                      double level_tol = 1e-9, double speed_tol = 1e-6) {
    double sum = 0.0;
    for (const auto& p : profiles) {
        if (std::abs(p.c) > speed_tol)
            throw std::invalid_argument("standing_terrace_energy: profile speed " + fmt17(p.c) + " is not zero");
        if (std::abs(V.value(p.m_minus) - h) > level_tol || std::abs(V.value(p.m_plus) - h) > level_tol)
            throw std::invalid_argument("standing_terrace_energy: profile endpoints are not at level h");
        FrontProfile q = p;
        q.c = 0.0;
        sum += profile_energy(q, V, 0.0, h).value;
    }
    return sum;
}

}  // namespace rdlab
