/// @file catalog.hpp
/// Critical points of a potential and the scalar constants derived from it.
#pragma once

#include "rdlab/format.hpp"
#include "rdlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlab {

enum class PointClass { minimum, saddle, degenerate };

inline const char* to_string(PointClass c) {
    switch (c) {
        case PointClass::minimum: return "minimum";
        case PointClass::saddle: return "saddle";
        default: return "degenerate";
    }
}

struct CriticalPoint {
    Vec u;
    double value = 0.0;
    Vec eigenvalues;
    PointClass kind = PointClass::saddle;
};

/// Axis-aligned box in u-space.
struct Box {
    Vec lo, hi;
    static Box cube(int n, double r) { return {Vec::Constant(n, -r), Vec::Constant(n, r)}; }
};

inline Vec sorted_eigenvalues(const Potential& V, const Vec& u) {
    if (V.dim() == 1) {
        double h;
        V.hessian(u.data(), &h);
        return Vec::Constant(1, h);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(V.hessian(u), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

namespace detail {

/// Unit directions: exact for n = 1, 2; deterministic pseudo-random otherwise.
inline std::vector<Vec> directions(int n, int count) {
    std::vector<Vec> out;
    if (n == 1) {
        out.push_back(Vec::Constant(1, 1.0));
        out.push_back(Vec::Constant(1, -1.0));
        return out;
    }
    if (n == 2) {
        for (int k = 0; k < count; ++k) {
            const double a = 2.0 * M_PI * k / count;
            Vec d(2);
            d << std::cos(a), std::sin(a);
            out.push_back(d);
        }
        return out;
    }
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g;
    for (int k = 0; k < count; ++k) {
        Vec d(n);
        for (int i = 0; i < n; ++i) d[i] = g(rng);
        out.push_back(d.normalized());
    }
    return out;
}

/// Sample points of the ball B(center, radius): a grid at the given density
/// for n <= 2, pseudo-random points otherwise.
inline void for_each_in_ball(const Vec& center, double radius, double density,
                             const std::function<void(const Vec&)>& f) {
    const int n = static_cast<int>(center.size());
    if (n <= 2) {
        const int m = std::max(2, static_cast<int>(std::ceil(2.0 * radius * density)));
        const double h = 2.0 * radius / m;
        Vec u(n);
        if (n == 1) {
            for (int i = 0; i <= m; ++i) {
                u[0] = center[0] - radius + i * h;
                f(u);
            }
            return;
        }
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= m; ++j) {
                u[0] = -radius + i * h;
                u[1] = -radius + j * h;
                if (u.squaredNorm() > radius * radius * (1.0 + 1e-12)) continue;
                f(center + u);
            }
        return;
    }
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int count = 200000;
    for (int k = 0; k < count; ++k) {
        Vec d(n);
        for (int i = 0; i < n; ++i) d[i] = g(rng);
        d.normalize();
        f(center + radius * std::pow(unif(rng), 1.0 / n) * d);
    }
}

/// Maximum of f over a ball: dense sampling followed by a compass-search
/// ascent from the best sample (kept inside the ball).
inline std::pair<double, Vec> maximize_over_ball(const std::function<double(const Vec&)>& f,
                                                 const Vec& center, double radius,
                                                 double density = 64.0) {
    double best = -std::numeric_limits<double>::infinity();
    Vec arg = center;
    for_each_in_ball(center, radius, density, [&](const Vec& u) {
        const double v = f(u);
        if (v > best) {
            best = v;
            arg = u;
        }
    });
    const int n = static_cast<int>(center.size());
    double step = 1.0 / density;
    while (step > 1e-12 * std::max(1.0, radius)) {
        bool moved = false;
        for (int i = 0; i < n; ++i)
            for (double s : {step, -step}) {
                Vec t = arg;
                t[i] += s;
                if ((t - center).norm() > radius) continue;
                const double v = f(t);
                if (v > best) {
                    best = v;
                    arg = t;
                    moved = true;
                }
            }
        if (!moved) step *= 0.5;
    }
    return {best, arg};
}

}  // namespace detail

/// Locate critical points of V in a box. Sign-change bracketing plus
/// safeguarded Newton for n = 1, damped Newton from grid seeds otherwise.
inline std::vector<CriticalPoint> find_critical_points(const Potential& V, const Box& box,
                                                       double density) {
    const int n = V.dim();
    if (box.lo.size() != n || box.hi.size() != n)
        throw std::invalid_argument("find_critical_points: box dimension mismatch");
    if (density < 8.0) throw std::invalid_argument("find_critical_points: density below 8 per unit");
    for (int i = 0; i < n; ++i)
        if (!(box.hi[i] > box.lo[i]) || !std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]))
            throw std::invalid_argument("find_critical_points: box must be bounded and nonempty");

    // Scale for the Newton tolerance: largest sampled gradient.
    double gscale = 1.0;
    std::vector<int> counts(n);
    for (int i = 0; i < n; ++i)
        counts[i] = std::max(2, static_cast<int>(std::ceil((box.hi[i] - box.lo[i]) * density)));
    const auto node = [&](const std::vector<int>& idx) {
        Vec u(n);
        for (int i = 0; i < n; ++i) u[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / counts[i];
        return u;
    };
    const double newton_tol_factor = 1e-12;
    const double merge_radius = 1e-6;
    std::vector<Vec> roots;

    if (n == 1) {
        const int m = counts[0];
        std::vector<double> x(m + 1), g(m + 1);
        for (int k = 0; k <= m; ++k) {
            x[k] = box.lo[0] + (box.hi[0] - box.lo[0]) * k / m;
            V.gradient(&x[k], &g[k]);
            gscale = std::max(gscale, std::abs(g[k]));
        }
        const double tol = newton_tol_factor * gscale;
        auto refine = [&](double a, double b, double x0, bool bracketed) -> bool {
            double xk = x0;
            for (int it = 0; it < 200; ++it) {
                double gk, hk;
                V.gradient(&xk, &gk);
                V.hessian(&xk, &hk);
                if (std::abs(gk) <= tol) {
                    roots.push_back(Vec::Constant(1, xk));
                    return true;
                }
                double next = hk != 0.0 ? xk - gk / hk : std::numeric_limits<double>::quiet_NaN();
                if (bracketed) {
                    double ga;
                    V.gradient(&a, &ga);
                    if ((ga < 0) == (gk < 0)) a = xk; else b = xk;
                    if (!(next > std::min(a, b) && next < std::max(a, b))) next = 0.5 * (a + b);
                    if (std::abs(b - a) < 1e-15 * std::max(1.0, std::abs(xk))) {
                        V.gradient(&next, &gk);
                        if (std::abs(gk) <= tol) roots.push_back(Vec::Constant(1, next));
                        return std::abs(gk) <= tol;
                    }
                }
                if (!std::isfinite(next) || next < box.lo[0] - 1.0 || next > box.hi[0] + 1.0) return false;
                xk = next;
            }
            return false;
        };
        for (int k = 0; k < m; ++k) {
            if (g[k] == 0.0) {
                refine(x[k], x[k], x[k], false);
            } else if ((g[k] < 0) != (g[k + 1] < 0) && g[k + 1] != 0.0) {
                refine(x[k], x[k + 1], 0.5 * (x[k] + x[k + 1]), true);
            } else if (k > 0 && std::abs(g[k]) < std::abs(g[k - 1]) && std::abs(g[k]) < std::abs(g[k + 1])) {
                // Local minimum of |V'| without sign change: possible tangential root.
                refine(x[k], x[k], x[k], false);
            }
        }
        if (g[m] == 0.0) roots.push_back(Vec::Constant(1, x[m]));
    } else {
        std::vector<int> idx(n, 0);
        std::vector<Vec> seeds;
        while (true) {
            Vec u = node(idx);
            gscale = std::max(gscale, V.gradient(u).norm());
            seeds.push_back(u);
            int i = 0;
            while (i < n && ++idx[i] > counts[i]) idx[i++] = 0;
            if (i == n) break;
        }
        const double tol = newton_tol_factor * gscale;
        for (const Vec& s : seeds) {
            Vec u = s;
            double gn = V.gradient(u).norm();
            for (int it = 0; it < 100 && gn > tol; ++it) {
                const Vec g = V.gradient(u);
                const Vec step = V.hessian(u).colPivHouseholderQr().solve(-g);
                if (!step.allFinite()) break;
                double lam = 1.0, gnew = 0.0;
                Vec trial;
                for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
                    trial = u + lam * step;
                    gnew = V.gradient(trial).norm();
                    if (gnew < gn) break;
                }
                if (!(gnew < gn)) break;
                u = trial;
                gn = gnew;
            }
            bool inside = true;
            for (int i = 0; i < n; ++i)
                inside = inside && u[i] >= box.lo[i] - 1e-9 && u[i] <= box.hi[i] + 1e-9;
            if (gn <= tol && inside) roots.push_back(u);
        }
    }

    std::vector<CriticalPoint> out;
    for (const Vec& r : roots) {
        bool inside = true;
        for (int i = 0; i < n; ++i) inside = inside && r[i] >= box.lo[i] - 1e-12 && r[i] <= box.hi[i] + 1e-12;
        if (!inside) continue;
        bool dup = false;
        for (const auto& c : out) dup = dup || (c.u - r).norm() <= merge_radius;
        if (dup) continue;
        CriticalPoint c;
        c.u = r;
        c.value = V.value(r);
        c.eigenvalues = sorted_eigenvalues(V, r);
        out.push_back(c);
    }
    double lam_scale = 0.0;
    for (const auto& c : out) lam_scale = std::max(lam_scale, c.eigenvalues.cwiseAbs().maxCoeff());
    const double degeneracy_tol = 1e-8 * std::max(lam_scale, 1e-300);
    for (auto& c : out) {
        if (c.eigenvalues.cwiseAbs().minCoeff() < degeneracy_tol) c.kind = PointClass::degenerate;
        else if (c.eigenvalues.minCoeff() > 0.0) c.kind = PointClass::minimum;
        else c.kind = PointClass::saddle;
    }
    std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        for (int i = 0; i < a.u.size(); ++i)
            if (a.u[i] != b.u[i]) return a.u[i] < b.u[i];
        return false;
    });
    return out;
}

struct SpectralConstants {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    /// Largest radius on which the eigenvalue sandwich holds (capped).
    double d_max = 0.0;
    /// Escape distance, safety_factor * d_max.
    double d_escape = 0.0;
    bool capped = false;
};

/// Extreme Hessian eigenvalues over the minima and the escape distance.
inline SpectralConstants spectral_constants(const Potential& V, const std::vector<Vec>& minima,
                                            double safety_factor = 0.9, double d_cap = 1.0) {
    if (minima.empty()) throw std::invalid_argument("spectral_constants: no minimum points");
    SpectralConstants s;
    s.lambda_min = std::numeric_limits<double>::infinity();
    s.lambda_max = -std::numeric_limits<double>::infinity();
    for (const Vec& m : minima) {
        const Vec e = sorted_eigenvalues(V, m);
        if (!(e.minCoeff() > 0.0)) throw std::invalid_argument("spectral_constants: degenerate or non-minimum point");
        s.lambda_min = std::min(s.lambda_min, e.minCoeff());
        s.lambda_max = std::max(s.lambda_max, e.maxCoeff());
    }
    const double lo = s.lambda_min / 2.0, hi = 2.0 * s.lambda_max;
    auto ok = [&](const Vec& u) {
        const Vec e = sorted_eigenvalues(V, u);
        return e.minCoeff() >= lo && e.maxCoeff() <= hi;
    };
    const int n = V.dim();
    const int scan = 4096;
    double d = d_cap;
    for (const Vec& m : minima)
        for (const Vec& dir : detail::directions(n, 256)) {
            // First violation along the ray, then bisection on the radius.
            double prev = 0.0;
            for (int k = 1; k <= scan; ++k) {
                const double r = d_cap * k / scan;
                if (!ok(m + r * dir)) {
                    double a = prev, b = r;
                    for (int it = 0; it < 60; ++it) {
                        const double mid = 0.5 * (a + b);
                        (ok(m + mid * dir) ? a : b) = mid;
                    }
                    d = std::min(d, a);
                    break;
                }
                prev = r;
            }
        }
    s.d_max = d;
    s.capped = d >= d_cap;
    if (s.d_max < 1e-6) throw std::runtime_error("spectral_constants: escape radius below 1e-6, pathological potential");
    s.d_escape = safety_factor * s.d_max;
    return s;
}

struct HullConstants {
    double q_low_hull = 0.0;
    double lambda0 = 1.0;
};

/// Lowest quadratic hull quotient (V(u) - V(m)) / |u - m|^2 and the energy
/// weighting Lambda0 = 1 / max(1, -4 q).
inline HullConstants lower_hull_constants(const Potential& V, const std::vector<Vec>& minima,
                                          double box_radius, double density = 64.0) {
    if (minima.empty()) throw std::invalid_argument("lower_hull_constants: no minimum points");
    HullConstants h;
    h.q_low_hull = std::numeric_limits<double>::infinity();
    const Vec origin = Vec::Zero(V.dim());
    for (const Vec& m : minima) {
        const double vm = V.value(m);
        const double excl = 1e-3;
        auto negq = [&](const Vec& u) {
            const double r2 = (u - m).squaredNorm();
            if (r2 < excl * excl) return -std::numeric_limits<double>::infinity();
            return -(V.value(u) - vm) / r2;
        };
        const auto [best, arg] = detail::maximize_over_ball(negq, origin, box_radius * std::sqrt(double(V.dim())), density);
        (void)arg;
        // Near m the quotient tends to half the smallest Hessian eigenvalue.
        const double near = sorted_eigenvalues(V, m).minCoeff() / 2.0;
        h.q_low_hull = std::min({h.q_low_hull, -best, near});
    }
    h.lambda0 = 1.0 / std::max(1.0, -4.0 * h.q_low_hull);
    return h;
}

struct Coercivity {
    bool holds = false;
    double r0 = 0.0;
    double r_att_inf = 0.0;
    double r_att_x = 0.0;
    Vec witness;
};

/// Check u . grad V(u) / |u|^2 >= eps on sampled spheres of radius in (0, R_max].
inline Coercivity check_coercivity(const Potential& V, double r_max, int samples,
                                   double eps = 1e-2, double margin = 0.5) {
    Coercivity c;
    const int n = V.dim();
    const auto dirs = detail::directions(n, 128);
    double largest_fail = 0.0;
    for (int k = samples; k >= 1; --k) {
        const double r = r_max * k / samples;
        for (const Vec& d : dirs) {
            const Vec u = r * d;
            if (u.dot(V.gradient(u)) / (r * r) < eps) {
                if (largest_fail == 0.0) {
                    largest_fail = r;
                    c.witness = u;
                }
                break;
            }
        }
        if (largest_fail > 0.0) break;
    }
    c.holds = largest_fail < r_max;
    if (!c.holds) return c;
    c.r0 = largest_fail > 0.0 ? largest_fail + r_max / samples : r_max / samples;
    c.r_att_inf = c.r0 + margin;
    c.r_att_x = 2.0 * c.r_att_inf;
    return c;
}

struct FirewallConstants {
    double kappa0 = 0.0;
    double nu_fire0 = 0.0;
    double k_fire0 = 0.0;
    /// Firewall threshold d_esc (small escape distance).
    double d_esc = 0.0;
    double hull_length = 0.0;
    double c_noesc = 0.0;
};

/// Everything derived from V that the diagnostics need.
struct Catalog {
    PotentialPtr potential;
    std::vector<CriticalPoint> points;
    std::vector<Vec> minima;
    double lambda_min = 0.0, lambda_max = 0.0;
    double d_max = 0.0;
    /// Escape distance d_Esc.
    double d_escape = 0.0;
    double q_low_hull = 0.0;
    double lambda0 = 1.0;
    double r_att_inf = 0.0, r_att_x = 0.0;
    double kappa0 = 0.0, nu_fire0 = 0.0, k_fire0 = 0.0;
    double d_esc = 0.0, hull_length = 0.0, c_noesc = 0.0;
    /// Largest |eigenvalue| of D^2V over the attracting ball.
    double hessian_bound = 0.0;

    double dt_max() const { return 1.0 / (2.0 * hessian_bound); }
    double max_min_norm() const {
        double r = 0.0;
        for (const Vec& m : minima) r = std::max(r, m.norm());
        return r;
    }
    /// Index of the minimum closest to u.
    int nearest_minimum(const Vec& u) const {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(minima.size()); ++i) {
            const double d = (minima[i] - u).norm();
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    }
};

/// Lab-frame firewall constants, the hull length and the no-escape speed.
inline FirewallConstants firewall_constants(const Catalog& c, double density = 64.0) {
    FirewallConstants f;
    const double L0 = c.lambda0;
    f.kappa0 = std::min(std::sqrt(2.0 / L0), std::sqrt(c.lambda_min / 2.0));
    f.nu_fire0 = std::min(1.0 / L0, c.lambda_min / (4.0 * L0 * c.lambda_max));
    const Potential& V = *c.potential;
    const double radius = c.r_att_inf + c.max_min_norm();
    double kmax = -std::numeric_limits<double>::infinity();
    for (const Vec& m : c.minima) {
        const double vm = V.value(m);
        auto g = [&](const Vec& v) {
            const Vec u = m + v;
            return f.nu_fire0 * (L0 * (V.value(u) - vm) + 0.5 * v.squaredNorm()) - v.dot(V.gradient(u)) +
                   0.25 * c.lambda_min * v.squaredNorm();
        };
        kmax = std::max(kmax, detail::maximize_over_ball(g, Vec::Zero(V.dim()), radius, density).first);
    }
    f.k_fire0 = kmax;
    f.d_esc = c.d_escape * std::sqrt(std::min(L0 / 2.0, 0.25) / ((1.0 + f.kappa0) / 2.0));
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("firewall constant ") + name + " is not positive (" + fmt17(v) + ")");
    };
    positive(f.kappa0, "kappa0");
    positive(f.nu_fire0, "nu_fire0");
    positive(f.k_fire0, "K_fire0");
    positive(f.d_esc, "d_esc");
    f.hull_length = std::log(16.0 * f.k_fire0 / (f.nu_fire0 * f.d_esc * f.d_esc * f.kappa0)) / f.kappa0;
    positive(f.hull_length, "L");
    f.c_noesc = 8.0 * f.k_fire0 * f.hull_length / (f.kappa0 * f.d_esc * f.d_esc);
    positive(f.c_noesc, "c_noesc");
    return f;
}

struct CatalogOptions {
    double r_max = 10.0;
    int coercivity_samples = 2000;
    double critical_density = 64.0;
    double safety_factor = 0.9;
    double d_cap = 1.0;
    double sample_density = 64.0;
};

/// Full catalog: coercivity, critical points, spectral, hull and firewall constants.
inline Catalog build_catalog(PotentialPtr V, const CatalogOptions& opt = {}) {
    Catalog c;
    c.potential = V;
    const Coercivity co = check_coercivity(*V, opt.r_max, opt.coercivity_samples);
    if (!co.holds) throw ConfigError("potential '" + V->name() + "' is not coercive up to radius " + fmt17(opt.r_max));
    c.r_att_inf = co.r_att_inf;
    c.r_att_x = co.r_att_x;
    c.points = find_critical_points(*V, Box::cube(V->dim(), co.r0), opt.critical_density);
    for (const auto& p : c.points)
        if (p.kind == PointClass::minimum) c.minima.push_back(p.u);
    if (c.minima.empty()) throw ConfigError("potential '" + V->name() + "' has no nondegenerate minimum");
    const SpectralConstants s = spectral_constants(*V, c.minima, opt.safety_factor, opt.d_cap);
    c.lambda_min = s.lambda_min;
    c.lambda_max = s.lambda_max;
    c.d_max = s.d_max;
    c.d_escape = s.d_escape;
    const HullConstants h = lower_hull_constants(*V, c.minima, c.r_att_inf, opt.sample_density);
    c.q_low_hull = h.q_low_hull;
    c.lambda0 = h.lambda0;
    const FirewallConstants f = firewall_constants(c, opt.sample_density);
    c.kappa0 = f.kappa0;
    c.nu_fire0 = f.nu_fire0;
    c.k_fire0 = f.k_fire0;
    c.d_esc = f.d_esc;
    c.hull_length = f.hull_length;
    c.c_noesc = f.c_noesc;
    c.hessian_bound = detail::maximize_over_ball(
        [&](const Vec& u) { return sorted_eigenvalues(*V, u).cwiseAbs().maxCoeff(); },
        Vec::Zero(V->dim()), c.r_att_inf, opt.sample_density).first;
    return c;
}

/// Worst margins of the escape-ball properties over sampled points of every
/// ball B(m, d_Esc). Nonnegative values mean the property holds.
struct EscapeBallAudit {
    double eigen_lower = 0.0, eigen_upper = 0.0;
    double value_lower = 0.0, value_upper = 0.0;
    double slope_lower = 0.0, slope_upper = 0.0;
    double weighted_energy = 0.0;
    int samples = 0;
};

inline EscapeBallAudit audit_escape_ball(const Catalog& c, int samples_per_ball = 10000) {
    EscapeBallAudit a;
    a.eigen_lower = a.eigen_upper = a.value_lower = a.value_upper = std::numeric_limits<double>::infinity();
    a.slope_lower = a.slope_upper = a.weighted_energy = std::numeric_limits<double>::infinity();
    const Potential& V = *c.potential;
    const int n = V.dim();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const Vec& m : c.minima) {
        const double vm = V.value(m);
        for (int k = 0; k < samples_per_ball; ++k) {
            Vec d(n);
            for (int i = 0; i < n; ++i) d[i] = g(rng);
            d.normalize();
            const Vec v = c.d_escape * std::pow(unif(rng), 1.0 / n) * d;
            const Vec u = m + v;
            const Vec e = sorted_eigenvalues(V, u);
            const double r2 = v.squaredNorm();
            const double dv = V.value(u) - vm;
            const double slope = v.dot(V.gradient(u));
            a.eigen_lower = std::min(a.eigen_lower, e.minCoeff() - c.lambda_min / 2.0);
            a.eigen_upper = std::min(a.eigen_upper, 2.0 * c.lambda_max - e.maxCoeff());
            a.value_lower = std::min(a.value_lower, dv - c.lambda_min / 4.0 * r2);
            a.value_upper = std::min(a.value_upper, c.lambda_max * r2 - dv);
            a.slope_lower = std::min(a.slope_lower, slope - c.lambda_min / 2.0 * r2);
            a.slope_upper = std::min(a.slope_upper, 2.0 * c.lambda_max * r2 - slope);
            ++a.samples;
        }
        detail::for_each_in_ball(Vec::Zero(n), c.r_att_inf, 64.0, [&](const Vec& u) {
            a.weighted_energy = std::min(a.weighted_energy,
                                         c.lambda0 * (V.value(u) - vm) + 0.25 * (u - m).squaredNorm());
        });
    }
    return a;
}

/// Flat key = value report.
inline void write_catalog(std::ostream& os, const Catalog& c) {
    const Potential& V = *c.potential;
    os << "potential.name = " << V.name() << "\n";
    os << "potential.params =";
    for (double p : V.params()) os << " " << fmt17(p);
    os << "\n";
    os << "dimension = " << V.dim() << "\n";
    os << "critical_points = " << c.points.size() << "\n";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto& p = c.points[i];
        const std::string k = "point." + std::to_string(i);
        os << k << ".u =";
        for (int j = 0; j < p.u.size(); ++j) os << " " << fmt17(p.u[j]);
        os << "\n" << k << ".value = " << fmt17(p.value) << "\n" << k << ".eigenvalues =";
        for (int j = 0; j < p.eigenvalues.size(); ++j) os << " " << fmt17(p.eigenvalues[j]);
        os << "\n" << k << ".class = " << to_string(p.kind) << "\n";
    }
    os << "lambda_min = " << fmt17(c.lambda_min) << "\n";
    os << "lambda_max = " << fmt17(c.lambda_max) << "\n";
    os << "d_max = " << fmt17(c.d_max) << "\n";
    os << "d_Esc = " << fmt17(c.d_escape) << "\n";
    os << "q_low_hull = " << fmt17(c.q_low_hull) << "\n";
    os << "Lambda0 = " << fmt17(c.lambda0) << "\n";
    os << "R_att_inf = " << fmt17(c.r_att_inf) << "\n";
    os << "R_att_X = " << fmt17(c.r_att_x) << "\n";
    os << "kappa0 = " << fmt17(c.kappa0) << "\n";
    os << "nu_fire0 = " << fmt17(c.nu_fire0) << "\n";
    os << "K_fire0 = " << fmt17(c.k_fire0) << "\n";
    os << "d_esc = " << fmt17(c.d_esc) << "\n";
    os << "L = " << fmt17(c.hull_length) << "\n";
    os << "c_noesc = " << fmt17(c.c_noesc) << "\n";
    os << "hessian_bound = " << fmt17(c.hessian_bound) << "\n";
    os << "dt_max = " << fmt17(c.dt_max()) << "\n";
    os << "hypothesis.disc_vel = assumed\n";
    os << "hypothesis.disc_front = assumed\n";
}

}  // namespace rdlab
