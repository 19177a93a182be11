/// @file front.hpp
/// Travelling fronts phi'' = -c phi' + grad V(phi): shooting from the
/// unstable manifold of (m_-, 0), speed bisection, normalization, and the
/// weighted-energy and tail certificates.
#pragma once

#include "rdlab/catalog.hpp"
#include "rdlab/format.hpp"
#include "rdlab/potential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlab {

/// (psi, -c psi + grad V(phi)) for y = (phi, psi).
inline Vec front_rhs(const Potential& V, double c, const Vec& y) {
    const int n = V.dim();
    Vec out(2 * n);
    Vec g(n);
    V.gradient(y.data(), g.data());
    out.head(n) = y.tail(n);
    out.tail(n) = -c * y.tail(n) + g;
    return out;
}

namespace detail {

/// Dormand-Prince 5(4) with error control. `accept(xi, y)` is called after
/// every accepted step and returns false to stop.
inline void integrate_dp45(const std::function<Vec(const Vec&)>& f, Vec y, double xi, double xi_max,
                           double rtol, double atol, double h_max,
                           const std::function<bool(double, const Vec&)>& accept) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
    double h = std::min(h_max, 1e-3);
    Vec k1 = f(y);
    while (xi < xi_max) {
        h = std::min(h, xi_max - xi);
        const Vec k2 = f(y + h * a21 * k1);
        const Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
        const Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = f(y5);
        const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double en = 0.0;
        for (int i = 0; i < y.size(); ++i)
            en = std::max(en, std::abs(err[i]) / (atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]))));
        if (!std::isfinite(en)) {
            h *= 0.25;
            if (h < 1e-14) return;
            continue;
        }
        if (en <= 1.0) {
            xi += h;
            y = y5;
            k1 = k7;
            if (!accept(xi, y)) return;
        }
        const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
        h = std::min(h_max, h * std::clamp(fac, 0.2, 5.0));
        if (h < 1e-14) return;
    }
}

}  // namespace detail

/// Sampled front with speed, endpoints and normalization shift.
struct FrontProfile {
    int n = 1;
    double c = 0.0;
    Vec m_minus, m_plus;
    /// Mesh and samples; phi and dphi are node-major with n entries each.
    std::vector<double> xi, phi, dphi;
    /// Shift applied to the raw integration coordinate.
    double xi_norm = 0.0;
    /// Growth rate of phi - m_- at -inf and decay rate of phi - m_+ at +inf.
    double rate_minus = 0.0, rate_plus = 0.0;

    std::size_t size() const { return xi.size(); }
    Vec phi_at(std::size_t k) const { return Eigen::Map<const Vec>(&phi[k * n], n); }
    Vec dphi_at(std::size_t k) const { return Eigen::Map<const Vec>(&dphi[k * n], n); }

    /// Cubic Hermite interpolation, exponential tails beyond the mesh.
    Vec eval(double x) const {
        const std::size_t K = xi.size();
        if (x <= xi.front()) {
            const Vec a = phi_at(0) - m_minus;
            return m_minus + a * std::exp(rate_minus * (x - xi.front()));
        }
        if (x >= xi.back()) {
            const Vec b = phi_at(K - 1) - m_plus;
            return m_plus + b * std::exp(-rate_plus * (x - xi.back()));
        }
        const std::size_t i = std::upper_bound(xi.begin(), xi.end(), x) - xi.begin();
        const double x0 = xi[i - 1], x1 = xi[i], h = x1 - x0, s = (x - x0) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * phi_at(i - 1) + h10 * h * dphi_at(i - 1) + h01 * phi_at(i) + h11 * h * dphi_at(i);
    }
    double eval1(double x) const { return eval(x)[0]; }
};

enum class ShootOutcome { hit, overshoot, undershoot, wander, inconclusive };

inline const char* to_string(ShootOutcome o) {
    switch (o) {
        case ShootOutcome::hit: return "hit";
        case ShootOutcome::overshoot: return "overshoot";
        case ShootOutcome::undershoot: return "undershoot";
        case ShootOutcome::wander: return "wander";
        default: return "inconclusive";
    }
}

struct ShootOptions {
    double delta_launch = 1e-6;
    double capture_radius = 0.01;
    double wander_radius = 10.0;
    double xi_max = 1e4;
    double rtol = 1e-12, atol = 1e-14;
    double h_max = 0.05;
    /// Launch angle in the unstable subspace (n > 1 only).
    double launch_angle = 0.0;
};

struct ShootResult {
    ShootOutcome outcome = ShootOutcome::inconclusive;
    /// Scalar side classification used by bisection (overshoot/undershoot),
    /// or wander/inconclusive when undecided.
    ShootOutcome side = ShootOutcome::inconclusive;
    /// Smallest phase-space distance to (m_+, 0).
    double closest = std::numeric_limits<double>::infinity();
    /// Profile truncated at the closest approach (meaningful when hit).
    FrontProfile profile;
};

namespace detail {

/// Unstable eigenpairs (rate r > 0, direction in u-space) of the travelling-frame
/// linearization at (m, 0), sorted by decreasing rate.
inline std::vector<std::pair<double, Vec>> unstable_modes(const Potential& V, double c, const Vec& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(V.hessian(m));
    std::vector<std::pair<double, Vec>> out;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double mu = es.eigenvalues()[i];
        const double r = 0.5 * (-c + std::sqrt(c * c + 4.0 * mu));
        if (mu > 0.0 && r > 0.0) out.emplace_back(r, es.eigenvectors().col(i));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    return out;
}

/// Decay rate (c + sqrt(c^2 + 4 mu_min)) / 2 of the stable manifold at (m, 0).
inline double predicted_decay_rate(const Potential& V, double c, const Vec& m) {
    const double mu = sorted_eigenvalues(V, m).minCoeff();
    return 0.5 * (c + std::sqrt(c * c + 4.0 * mu));
}

}  // namespace detail

/// Integrate from m_- + delta * v_unstable and classify the trajectory.
inline ShootResult shoot(const Potential& V, double c, const Vec& m_minus, const Vec& m_plus,
                         const ShootOptions& opt = {}) {
    const int n = V.dim();
    if (!(opt.delta_launch >= 1e-8 && opt.delta_launch <= 1e-4))
        throw std::invalid_argument("shoot: delta_launch must lie in [1e-8, 1e-4]");
    const auto modes = detail::unstable_modes(V, c, m_minus);
    if (modes.empty()) throw std::invalid_argument("shoot: m_minus has no unstable direction (not a minimum)");
    const Vec span = m_plus - m_minus;
    Vec dir = modes[0].second;
    double rate = modes[0].first;
    if (n > 1 && modes.size() > 1) {
        dir = std::cos(opt.launch_angle) * modes[0].second + std::sin(opt.launch_angle) * modes[1].second;
        rate = std::cos(opt.launch_angle) * std::cos(opt.launch_angle) * modes[0].first +
               std::sin(opt.launch_angle) * std::sin(opt.launch_angle) * modes[1].first;
    }
    if (n == 1 || opt.launch_angle == 0.0)
        if (dir.dot(span) < 0.0) dir = -dir;
    Vec y(2 * n);
    y.head(n) = m_minus + opt.delta_launch * dir;
    if (n == 1 || modes.size() == 1) {
        y.tail(n) = rate * opt.delta_launch * dir;
    } else {
        y.tail(n) = opt.delta_launch * (std::cos(opt.launch_angle) * modes[0].first * modes[0].second +
                                        std::sin(opt.launch_angle) * modes[1].first * modes[1].second);
        if (opt.launch_angle == 0.0 && modes[0].second.dot(span) < 0.0) y.tail(n) = -y.tail(n);
    }

    ShootResult res;
    std::vector<double> xs{0.0}, ph(y.data(), y.data() + n), dph(y.data() + n, y.data() + 2 * n);
    const double span2 = span.squaredNorm();
    std::size_t best_k = 0;
    bool captured = false;
    double prev_dist = std::numeric_limits<double>::infinity();
    auto phase_dist = [&](const Vec& yy) {
        Vec d(2 * n);
        d.head(n) = yy.head(n) - m_plus;
        d.tail(n) = yy.tail(n);
        return d.norm();
    };
    const auto f = [&](const Vec& yy) { return front_rhs(V, c, yy); };
    detail::integrate_dp45(f, y, 0.0, opt.xi_max, opt.rtol, opt.atol, opt.h_max, [&](double xi, const Vec& yy) {
        xs.push_back(xi);
        for (int i = 0; i < n; ++i) {
            ph.push_back(yy[i]);
            dph.push_back(yy[n + i]);
        }
        const double dist = phase_dist(yy);
        if (dist < res.closest) {
            res.closest = dist;
            best_k = xs.size() - 1;
        }
        if (dist <= opt.capture_radius) captured = true;
        if (yy.head(n).norm() > opt.wander_radius) {
            res.side = ShootOutcome::wander;
            return false;
        }
        if (n == 1 || span2 == 0.0) {
            const double sigma = span2 > 0.0 ? (yy.head(n) - m_minus).dot(span) / span2 : 0.0;
            const double dsigma = span2 > 0.0 ? yy.tail(n).dot(span) / span2 : 0.0;
            if (sigma > 1.0) {
                res.side = ShootOutcome::overshoot;
                return false;
            }
            if (dsigma < 0.0) {
                res.side = ShootOutcome::undershoot;
                return false;
            }
            // Overdamped approach to an intermediate equilibrium: stalls short of m_+.
            if (dist > opt.capture_radius && front_rhs(V, c, yy).norm() < 1e-11) {
                res.side = ShootOutcome::undershoot;
                return false;
            }
        } else if (captured && dist > prev_dist && dist > 4.0 * res.closest) {
            // Distance monotonicity broke down after capture.
            res.side = ShootOutcome::inconclusive;
            return false;
        }
        prev_dist = dist;
        return true;
    });
    res.outcome = captured ? ShootOutcome::hit : res.side;
    FrontProfile& p = res.profile;
    p.n = n;
    p.c = c;
    p.m_minus = m_minus;
    p.m_plus = m_plus;
    const std::size_t K = captured ? best_k + 1 : xs.size();
    p.xi.assign(xs.begin(), xs.begin() + K);
    p.phi.assign(ph.begin(), ph.begin() + K * n);
    p.dphi.assign(dph.begin(), dph.begin() + K * n);
    p.rate_minus = rate;
    p.rate_plus = detail::predicted_decay_rate(V, c, m_plus);
    return res;
}

class NoConnectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SpeedSolveOptions {
    double c_tol = 1e-10;
    ShootOptions shoot;
    /// Launch offset of the consistency re-solve.
    double delta_check = 1e-7;
    bool check_launch = true;
};

struct SpeedSolution {
    FrontProfile profile;
    std::vector<std::string> warnings;
    int bisection_steps = 0;
    /// Speed from the re-solve at delta_check (NaN when skipped).
    double c_check = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double bisect_speed(const Potential& V, const Vec& m_minus, const Vec& m_plus, double lo, double hi,
                           const SpeedSolveOptions& opt, double delta, int* steps) {
    ShootOptions so = opt.shoot;
    so.delta_launch = delta;
    const ShootOutcome s_lo = shoot(V, lo, m_minus, m_plus, so).side;
    const ShootOutcome s_hi = shoot(V, hi, m_minus, m_plus, so).side;
    const auto decided = [](ShootOutcome s) { return s == ShootOutcome::overshoot || s == ShootOutcome::undershoot; };
    if (!decided(s_lo) || !decided(s_hi) || s_lo == s_hi)
        throw NoConnectionError("no sign change of the shooting outcome in speed bracket [" + fmt17(lo) + ", " +
                                fmt17(hi) + "] (" + to_string(s_lo) + ", " + to_string(s_hi) + ")");
    int k = 0;
    while (hi - lo > opt.c_tol && k < 200) {
        const double mid = 0.5 * (lo + hi);
        const ShootOutcome s = shoot(V, mid, m_minus, m_plus, so).side;
        if (s == s_lo) lo = mid;
        else if (s == s_hi) hi = mid;
        else break;
        ++k;
    }
    if (steps) *steps = k;
    return 0.5 * (lo + hi);
}

/// Best-effort search for n > 1: minimize the closest approach over
/// (speed, launch angle) by a coarse scan and a compass refinement.
inline std::pair<double, double> search_connection(const Potential& V, const Vec& m_minus, const Vec& m_plus,
                                                   double lo, double hi, const SpeedSolveOptions& opt,
                                                   int* hits) {
    ShootOptions so = opt.shoot;
    so.rtol = 1e-9;
    so.atol = 1e-12;
    so.xi_max = 200.0;
    auto dist = [&](double c, double a) {
        so.launch_angle = a;
        return shoot(V, c, m_minus, m_plus, so).closest;
    };
    double bc = lo, ba = 0.0, bd = std::numeric_limits<double>::infinity();
    const int nc = 41, na = 64;
    *hits = 0;
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < na; ++j) {
            const double c = lo + (hi - lo) * i / (nc - 1), a = 2.0 * M_PI * j / na;
            const double d = dist(c, a);
            if (d <= opt.shoot.capture_radius) ++*hits;
            if (d < bd) {
                bd = d;
                bc = c;
                ba = a;
            }
        }
    double sc = (hi - lo) / (nc - 1), sa = 2.0 * M_PI / na;
    while (sc > opt.c_tol || sa > 1e-10) {
        bool moved = false;
        for (auto [dc, da] : {std::pair{sc, 0.0}, {-sc, 0.0}, {0.0, sa}, {0.0, -sa}}) {
            const double d = dist(bc + dc, ba + da);
            if (d < bd) {
                bd = d;
                bc += dc;
                ba += da;
                moved = true;
            }
        }
        if (!moved) {
            sc *= 0.5;
            sa *= 0.5;
        }
    }
    return {bc, ba};
}

}  // namespace detail

/// Unique bistable speed in the bracket (scalar case) by bisection on the
/// over/undershoot classification; the final profile is re-integrated.
inline SpeedSolution solve_speed(const Potential& V, const Vec& m_minus, const Vec& m_plus, double c_lo,
                                 double c_hi, const SpeedSolveOptions& opt = {}) {
    if (!(c_hi > c_lo)) throw std::invalid_argument("solve_speed: empty bracket");
    SpeedSolution sol;
    ShootOptions so = opt.shoot;
    double c;
    if (V.dim() == 1) {
        c = detail::bisect_speed(V, m_minus, m_plus, c_lo, c_hi, opt, so.delta_launch, &sol.bisection_steps);
        if (opt.check_launch) {
            sol.c_check = detail::bisect_speed(V, m_minus, m_plus, c_lo, c_hi, opt, opt.delta_check, nullptr);
            if (std::abs(sol.c_check - c) > 4.0 * opt.c_tol)
                sol.warnings.push_back("launch-offset check disagrees: " + fmt17(c) + " vs " + fmt17(sol.c_check));
        }
    } else {
        int hits = 0;
        const auto [cb, ab] = detail::search_connection(V, m_minus, m_plus, c_lo, c_hi, opt, &hits);
        c = cb;
        so.launch_angle = ab;
        sol.warnings.push_back("n > 1: first connection found by multi-start search; multiplicity not resolved (" +
                               std::to_string(hits) + " coarse hits)");
    }
    const ShootResult r = shoot(V, c, m_minus, m_plus, so);
    if (r.outcome != ShootOutcome::hit)
        throw NoConnectionError("converged speed " + fmt17(c) + " does not reach the target minimum (closest " +
                                fmt17(r.closest) + ")");
    sol.profile = r.profile;
    return sol;
}

/// Shift so that |phi(0) - m_+| = d_Esc at the last exit from the d_Esc-ball of m_+.
inline FrontProfile normalize(const FrontProfile& in, double d_escape) {
    const std::size_t K = in.size();
    if (K < 2) throw std::invalid_argument("normalize: profile too short");
    auto dist = [&](std::size_t k) { return (in.phi_at(k) - in.m_plus).norm() - d_escape; };
    std::size_t k = K - 1;
    if (dist(k) >= 0.0) throw std::runtime_error("normalize: profile does not end inside the d_Esc-ball of m_plus");
    while (k > 0 && dist(k - 1) < 0.0) --k;
    if (k == 0) throw std::runtime_error("normalize: profile never leaves the d_Esc-ball of m_plus (degenerate profile)");
    // Root of |phi - m_+| = d_Esc on [xi_{k-1}, xi_k] by bisection on the Hermite interpolant.
    double a = in.xi[k - 1], b = in.xi[k];
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        ((in.eval(mid) - in.m_plus).norm() - d_escape >= 0.0 ? a : b) = mid;
    }
    const double root = dist(k - 1) == 0.0 ? in.xi[k - 1] : 0.5 * (a + b);
    FrontProfile out = in;
    for (double& x : out.xi) x -= root;
    out.xi_norm = in.xi_norm + root;
    return out;
}

struct WeightedEnergy {
    double value = 0.0;
    /// Same integral with |V - level| in place of V - level.
    double abs_scale = 0.0;
    double left_tail = 0.0, right_tail = 0.0;
    double relative() const { return abs_scale > 0.0 ? std::abs(value) / abs_scale : std::abs(value); }
};

/// int e^{w xi} (|phi'|^2/2 + V(phi) - level) d xi by end-corrected trapezoid
/// on the profile mesh plus analytic exponential tails.
inline WeightedEnergy profile_energy(const FrontProfile& p, const Potential& V, double w, double level) {
    const int n = p.n;
    const std::size_t K = p.size();
    WeightedEnergy e;
    std::vector<double> f(K), fa(K), df(K);
    Vec g(n);
    for (std::size_t k = 0; k < K; ++k) {
        const Vec ph = p.phi_at(k), d = p.dphi_at(k);
        V.gradient(ph.data(), g.data());
        const Vec dd = -p.c * d + g;
        const double wt = std::exp(w * p.xi[k]);
        const double dens = 0.5 * d.squaredNorm() + V.value(ph) - level;
        f[k] = wt * dens;
        fa[k] = wt * (0.5 * d.squaredNorm() + std::abs(V.value(ph) - level));
        df[k] = wt * (w * dens + d.dot(dd) + g.dot(d));
    }
    for (std::size_t k = 1; k < K; ++k) {
        const double h = p.xi[k] - p.xi[k - 1];
        e.value += 0.5 * h * (f[k] + f[k - 1]) + h * h / 12.0 * (df[k - 1] - df[k]);
        e.abs_scale += 0.5 * h * (fa[k] + fa[k - 1]);
    }
    // Left tail: phi - m_- = a e^{r (xi - xi_0)}.
    {
        const Vec a = p.phi_at(0) - p.m_minus;
        const double r = p.rate_minus;
        const double mu = a.squaredNorm() > 0 ? a.dot(V.hessian(p.m_minus) * a) / a.squaredNorm() : 0.0;
        const double dv = V.value(p.m_minus) - level;
        const double w0 = std::exp(w * p.xi.front());
        double t = w0 * (r * r + mu) * a.squaredNorm() / (2.0 * (w + 2.0 * r));
        double ta = t;
        if (w > 0.0) {
            t += w0 * dv / w;
            ta += w0 * std::abs(dv) / w;
        } else if (std::abs(dv) > 1e-9) {
            throw std::runtime_error("profile_energy: left tail diverges (level mismatch without weight)");
        }
        e.left_tail = t;
        e.value += t;
        e.abs_scale += ta;
    }
    // Right tail: phi - m_+ = b e^{-rho (xi - xi_K)}.
    {
        const Vec b = p.phi_at(K - 1) - p.m_plus;
        const double rho = p.rate_plus;
        if (!(2.0 * rho > w)) throw std::runtime_error("profile_energy: right tail diverges");
        const double mu = b.squaredNorm() > 0 ? b.dot(V.hessian(p.m_plus) * b) / b.squaredNorm() : 0.0;
        const double dv = V.value(p.m_plus) - level;
        if (std::abs(dv) > 1e-9) throw std::runtime_error("profile_energy: right tail diverges (level mismatch)");
        const double t = std::exp(w * p.xi.back()) * (rho * rho + mu) * b.squaredNorm() / (2.0 * (2.0 * rho - w));
        e.right_tail = t;
        e.value += t;
        e.abs_scale += t;
    }
    return e;
}

/// Weighted energy int e^{c xi}(|phi'|^2/2 + V(phi) - V(m_+)); zero for a true front.
inline WeightedEnergy weighted_energy(const FrontProfile& p, const Potential& V) {
    if (!(p.c > 0.0)) throw std::invalid_argument("weighted_energy: needs c > 0");
    if (!(p.rate_plus > p.c)) throw std::runtime_error("weighted_energy: decay rate at +inf does not exceed c");
    return profile_energy(p, V, p.c, V.value(p.m_plus));
}

struct DecayCertificate {
    double rate_plus = 0.0, rate_minus = 0.0;
    double predicted_plus = 0.0;
    bool conclusive = false;
    bool passes = false;
};

/// Fit log|phi - m_+| on the + tail and compare with the linearization rate.
inline DecayCertificate decay_certificate(const FrontProfile& p, const Potential& V, double fit_tol = 1e-3) {
    DecayCertificate d;
    d.predicted_plus = detail::predicted_decay_rate(V, p.c, p.m_plus);
    auto fit = [](const std::vector<double>& x, const std::vector<double>& y) {
        const double nn = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    };
    const std::size_t K = p.size();
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) dmin = std::min(dmin, (p.phi_at(k) - p.m_plus).norm());
    // Keep well above the closest approach, where the unstable component is negligible.
    const double lo = std::max(1e-10, 1e2 * dmin), hi = 1e-3;
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < K; ++k) {
        const double r = (p.phi_at(k) - p.m_plus).norm();
        if (r >= lo && r <= hi) {
            xs.push_back(p.xi[k]);
            ys.push_back(std::log(r));
        }
    }
    std::vector<double> xm, ym;
    for (std::size_t k = 0; k < K; ++k) {
        const double r = (p.phi_at(k) - p.m_minus).norm();
        if (r >= 1e-10 && r <= 1e-3) {
            xm.push_back(p.xi[k]);
            ym.push_back(std::log(r));
        }
        if (r > 1e-3) break;
    }
    if (xm.size() >= 2) d.rate_minus = fit(xm, ym);
    if (xs.size() < 30) return d;
    d.conclusive = true;
    d.rate_plus = -fit(xs, ys);
    d.passes = d.rate_plus >= p.c - fit_tol && std::abs(d.rate_plus - d.predicted_plus) <= 0.05 * d.predicted_plus;
    return d;
}

/// Profile file: header lines with c, m_-, m_+, xi_norm and the tail rates,
/// then rows xi, phi_1..phi_n, phi'_1..phi'_n.
inline void write_profile(std::ostream& os, const FrontProfile& p) {
    auto vec = [&](const Vec& v) {
        std::string s;
        for (int i = 0; i < v.size(); ++i) s += " " + fmt17(v[i]);
        return s;
    };
    os << "# c = " << fmt17(p.c) << "\n";
    os << "# m_minus =" << vec(p.m_minus) << "\n";
    os << "# m_plus =" << vec(p.m_plus) << "\n";
    os << "# xi_norm = " << fmt17(p.xi_norm) << "\n";
    os << "# rate_minus = " << fmt17(p.rate_minus) << "\n";
    os << "# rate_plus = " << fmt17(p.rate_plus) << "\n";
    for (std::size_t k = 0; k < p.size(); ++k) {
        os << fmt17(p.xi[k]);
        for (int i = 0; i < p.n; ++i) os << " " << fmt17(p.phi[k * p.n + i]);
        for (int i = 0; i < p.n; ++i) os << " " << fmt17(p.dphi[k * p.n + i]);
        os << "\n";
    }
}

inline FrontProfile read_profile(std::istream& is) {
    FrontProfile p;
    std::string line;
    std::vector<std::vector<double>> rows;
    auto parse_vec = [](const std::string& s) {
        std::istringstream ss(s);
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size())).eval();
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            const std::string val = line.substr(eq + 1);
            if (key == "c") p.c = std::stod(val);
            else if (key == "m_minus") p.m_minus = parse_vec(val);
            else if (key == "m_plus") p.m_plus = parse_vec(val);
            else if (key == "xi_norm") p.xi_norm = std::stod(val);
            else if (key == "rate_minus") p.rate_minus = std::stod(val);
            else if (key == "rate_plus") p.rate_plus = std::stod(val);
            continue;
        }
        std::istringstream ss(line);
        std::vector<double> r;
        double x;
        while (ss >> x) r.push_back(x);
        rows.push_back(r);
    }
    p.n = static_cast<int>(p.m_minus.size());
    if (p.n < 1 || p.m_plus.size() != p.n) throw std::runtime_error("read_profile: missing endpoint header");
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != 1 + 2 * p.n) throw std::runtime_error("read_profile: malformed row");
        p.xi.push_back(r[0]);
        for (int i = 0; i < p.n; ++i) p.phi.push_back(r[1 + i]);
        for (int i = 0; i < p.n; ++i) p.dphi.push_back(r[1 + p.n + i]);
    }
    if (p.xi.size() < 2) throw std::runtime_error("read_profile: too few rows");
    return p;
}

inline FrontProfile load_profile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open profile '" + path + "'");
    return read_profile(f);
}

}  // namespace rdlab
