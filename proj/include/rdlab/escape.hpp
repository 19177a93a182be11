/// @file escape.hpp
/// Escape-point tracking: the d_Esc crossing, the hull-based escape point
/// built on the lab firewall, homogeneous markers, mean speeds and the
/// co-moving dissipation-locality indicator.
#pragma once

#include "rdlab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlab {

/// The hull escape set is empty: the firewall exceeds the no-escape hull even
/// next to the homogeneous marker.
class TrackingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Right homogeneous marker max(anchor, (c_noesc + 1) t), kept a margin away
/// from the grid end. The left marker is its mirror image.
inline double hom_marker(double t, double anchor, double c_noesc, const Grid& g, double margin) {
    return std::min(g.X - margin, std::max(anchor, (c_noesc + 1.0) * t));
}

/// Last crossing of |u - m| = d_Esc before x_hom when scanning from x_hom
/// toward the center. side = +1: sup over x <= x_hom (or -inf);
/// side = -1: inf over x >= x_hom (or +inf).
inline double escape_point(const FieldState& s, const Vec& m, double x_hom, int side, double d_escape) {
    const Grid& gr = s.grid;
    auto g = [&](int j) { return std::sqrt(detail::dist2_at(s, j, m)) - d_escape; };
    const double fi = std::clamp(gr.index_of(x_hom), 0.0, static_cast<double>(gr.N - 1));
    if (side > 0) {
        const int start = static_cast<int>(std::floor(fi + 1e-9));
        if (g(start) == 0.0) return gr.x(start);
        for (int j = start; j >= 1; --j) {
            const double a = g(j - 1), b = g(j);
            if (a == 0.0) return gr.x(j - 1);
            if ((a > 0) != (b > 0)) return gr.x(j - 1) + a / (a - b) * gr.dx;
        }
        return -detail::kInf;
    }
    const int start = static_cast<int>(std::ceil(fi - 1e-9));
    if (g(start) == 0.0) return gr.x(start);
    for (int j = start; j + 1 < gr.N; ++j) {
        const double a = g(j), b = g(j + 1);
        if (b == 0.0) return gr.x(j + 1);
        if ((a > 0) != (b > 0)) return gr.x(j) + a / (a - b) * gr.dx;
    }
    return detail::kInf;
}

namespace detail {

/// No-escape hull h(x): +inf left of 0, a ramp from d^2/2 to d^2/4 over
/// [0, L], then flat.
inline double hull(double x, double d, double L) {
    if (x < 0.0) return kInf;
    if (x >= L) return d * d / 4.0;
    return d * d / 2.0 * (1.0 - x / (2.0 * L));
}

/// Right-side hull escape point on positions xs (ascending) with firewall F.
inline double hull_escape_right(const std::vector<double>& xs, const std::vector<double>& F, double d, double L,
                                 double x_hom) {
    const double d2 = d * d;
    double best = -kInf;
    auto constrain = [&](double x, double f) {
        if (x > x_hom) return;
        if (f <= d2 / 4.0 || f <= hull(x_hom - x, d, L)) return;
        const double b = f >= d2 / 2.0 ? x : x - 2.0 * L * (1.0 - 2.0 * f / d2);
        best = std::max(best, b);
    };
    for (std::size_t j = 0; j < xs.size(); ++j) {
        constrain(xs[j], F[j]);
        if (j + 1 < xs.size()) {
            // The constraint is piecewise linear in x; its kink at F = d^2/2 may be the maximum.
            const double a = F[j] - d2 / 2.0, b = F[j + 1] - d2 / 2.0;
            if ((a > 0) != (b > 0) && a != b) {
                const double x = xs[j] + a / (a - b) * (xs[j + 1] - xs[j]);
                constrain(x, d2 / 2.0);
            }
        }
    }
    // The anchor x_Hom - 1 must always be admissible.
    if (best > x_hom - 1.0)
        throw TrackingError("hull escape set is empty: firewall exceeds the hull with anchor x_Hom - 1 = " +
                            fmt17(x_hom - 1.0));
    return best;
}

}  // namespace detail

/// Hull-based escape point from a firewall field on the grid. side = +1 uses
/// the right marker and returns -inf when unconstrained; side = -1 mirrors.
inline double hull_escape_point(const Grid& gr, const std::vector<double>& F, double d_esc, double L, double x_hom,
                                int side) {
    std::vector<double> xs(gr.N), f(gr.N);
    if (side > 0) {
        for (int j = 0; j < gr.N; ++j) {
            xs[j] = gr.x(j);
            f[j] = F[j];
        }
        return detail::hull_escape_right(xs, f, d_esc, L, x_hom);
    }
    for (int j = 0; j < gr.N; ++j) {
        xs[j] = -gr.x(gr.N - 1 - j);
        f[j] = F[gr.N - 1 - j];
    }
    return -detail::hull_escape_right(xs, f, d_esc, L, -x_hom);
}

struct DissipationLocality {
    double delta = std::numeric_limits<double>::quiet_NaN();
    /// The window hit the grid edge; delta is the floor 1/(distance to edge).
    bool floored = false;
};

/// Smallest eps with int_{-1/eps}^{1/eps} |u_t + c u_x|^2 (x_ref + y) dy <= eps.
inline DissipationLocality dissipation_locality(const FieldState& s, double x_ref, double c) {
    DissipationLocality r;
    if (!std::isfinite(x_ref)) return r;
    const Grid& gr = s.grid;
    const int N = gr.N, n = s.n;
    std::vector<double> q(N), cum(N, 0.0);
    for (int j = 0; j < N; ++j) {
        double a = 0.0;
        for (int k = 0; k < n; ++k) {
            const double v = s.ut[j * n + k] + c * s.ux[j * n + k];
            a += v * v;
        }
        q[j] = a;
    }
    for (int j = 1; j < N; ++j) cum[j] = cum[j - 1] + 0.5 * gr.dx * (q[j] + q[j - 1]);
    auto prim = [&](double x) {
        const double fi = std::clamp(gr.index_of(x), 0.0, static_cast<double>(N - 1));
        const int j = std::min(N - 2, static_cast<int>(std::floor(fi)));
        const double r0 = (fi - j) * gr.dx;
        const double qx = q[j] + (q[j + 1] - q[j]) * r0 / gr.dx;
        return cum[j] + 0.5 * r0 * (q[j] + qx);
    };
    const double avail = std::min(x_ref - gr.x(0), gr.x(N - 1) - x_ref);
    if (!(avail > 0.0)) return r;
    auto I = [&](double eps) { return prim(x_ref + 1.0 / eps) - prim(x_ref - 1.0 / eps); };
    double lo = 1.0 / avail;
    if (I(lo) <= lo) {
        r.delta = lo;
        r.floored = true;
        return r;
    }
    double hi = std::max(lo * 2.0, I(lo));
    while (I(hi) > hi) hi *= 2.0;
    for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (I(mid) <= mid ? hi : lo) = mid;
    }
    r.delta = hi;
    return r;
}

struct EscapeTrack {
    std::vector<double> t, x_Esc_plus, x_esc_plus, x_Esc_minus, x_esc_minus, x_hom_plus, x_hom_minus;
    std::vector<double> delta_plus, delta_minus;
    std::vector<char> floored_plus, floored_minus;
};

struct TrackerOptions {
    /// Minima at the right and left ends.
    Vec m_plus, m_minus;
    /// Frame speeds for the dissipation indicator on each side.
    double c_plus = 0.0, c_minus = 0.0;
    double anchor = 0.0;
    double boundary_margin = 10.0;
};

/// Streaming builder of the escape track.
class EscapeTracker {
public:
    EscapeTracker(const Catalog& c, TrackerOptions opt) : c_(c), opt_(std::move(opt)) {}

    void observe(const FieldState& s) {
        const Grid& gr = s.grid;
        const double hp = hom_marker(s.t, opt_.anchor, c_.c_noesc, gr, opt_.boundary_margin);
        const double hm = -hp;
        const double L = c_.hull_length, d = c_.d_esc;
        const FirewallField fp = firewall_lab(s, c_, opt_.m_plus);
        const double xep = hull_escape_point(gr, fp.F, d, L, hp, +1);
        const FirewallField fm = firewall_lab(s, c_, opt_.m_minus);
        const double xem = hull_escape_point(gr, fm.F, d, L, hm, -1);
        tr_.t.push_back(s.t);
        tr_.x_hom_plus.push_back(hp);
        tr_.x_hom_minus.push_back(hm);
        tr_.x_Esc_plus.push_back(escape_point(s, opt_.m_plus, hp, +1, c_.d_escape));
        tr_.x_Esc_minus.push_back(escape_point(s, opt_.m_minus, hm, -1, c_.d_escape));
        tr_.x_esc_plus.push_back(xep);
        tr_.x_esc_minus.push_back(xem);
        const auto dp = dissipation_locality(s, xep, opt_.c_plus);
        const auto dm = dissipation_locality(s, xem, opt_.c_minus);
        tr_.delta_plus.push_back(dp.delta);
        tr_.delta_minus.push_back(dm.delta);
        tr_.floored_plus.push_back(dp.floored);
        tr_.floored_minus.push_back(dm.floored);
    }

    const EscapeTrack& track() const { return tr_; }

private:
    const Catalog& c_;
    TrackerOptions opt_;
    EscapeTrack tr_;
};

/// Ordering x_Esc <= x_esc <= x_Hom - 1 (right side, mirrored on the left)
/// and the growth bound x_esc(t') - x_esc(t) <= c_noesc (t' - t).
struct TrackAudit {
    long ordering_checks = 0, ordering_violations = 0;
    long growth_checks = 0, growth_violations = 0;
    bool passes() const { return ordering_violations == 0 && growth_violations == 0; }
};

inline TrackAudit audit_track(const EscapeTrack& tr, double c_noesc, double tol = 1e-9) {
    TrackAudit a;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        if (std::isfinite(tr.x_Esc_plus[i]) && std::isfinite(tr.x_esc_plus[i])) {
            ++a.ordering_checks;
            if (tr.x_Esc_plus[i] > tr.x_esc_plus[i] + tol || tr.x_esc_plus[i] > tr.x_hom_plus[i] - 1.0 + tol)
                ++a.ordering_violations;
        }
        if (std::isfinite(tr.x_Esc_minus[i]) && std::isfinite(tr.x_esc_minus[i])) {
            ++a.ordering_checks;
            if (tr.x_Esc_minus[i] < tr.x_esc_minus[i] - tol || tr.x_esc_minus[i] < tr.x_hom_minus[i] + 1.0 - tol)
                ++a.ordering_violations;
        }
    }
    for (std::size_t i = 1; i < tr.t.size(); ++i) {
        const double h = tr.t[i] - tr.t[i - 1];
        if (std::isfinite(tr.x_esc_plus[i]) && std::isfinite(tr.x_esc_plus[i - 1])) {
            ++a.growth_checks;
            if (tr.x_esc_plus[i] - tr.x_esc_plus[i - 1] > c_noesc * h + tol) ++a.growth_violations;
        }
        if (std::isfinite(tr.x_esc_minus[i]) && std::isfinite(tr.x_esc_minus[i - 1])) {
            ++a.growth_checks;
            if (tr.x_esc_minus[i - 1] - tr.x_esc_minus[i] > c_noesc * h + tol) ++a.growth_violations;
        }
    }
    return a;
}

inline void write_track_csv(std::ostream& os, const EscapeTrack& tr) {
    os << "t,x_Esc_plus,x_esc_plus,x_Esc_minus,x_esc_minus,x_Hom_plus,x_Hom_minus,delta_dissip_plus,delta_dissip_minus\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        os << fmt17(tr.t[i]) << "," << fmt17(tr.x_Esc_plus[i]) << "," << fmt17(tr.x_esc_plus[i]) << ","
           << fmt17(tr.x_Esc_minus[i]) << "," << fmt17(tr.x_esc_minus[i]) << "," << fmt17(tr.x_hom_plus[i]) << ","
           << fmt17(tr.x_hom_minus[i]) << "," << fmt17(tr.delta_plus[i]) << "," << fmt17(tr.delta_minus[i]) << "\n";
}

struct LineFit {
    double slope = 0.0, intercept = 0.0, slope_stderr = 0.0, max_residual = 0.0;
    std::size_t points = 0;
};

/// Least-squares line through (t, x) restricted to t in [t0, t1], finite x only.
inline LineFit fit_line(const std::vector<double>& t, const std::vector<double>& x, double t0 = -detail::kInf,
                        double t1 = detail::kInf) {
    LineFit f;
    double st = 0, sx = 0, stt = 0, stx = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 - 1e-12 || t[i] > t1 + 1e-12 || !std::isfinite(x[i])) continue;
        st += t[i];
        sx += x[i];
        stt += t[i] * t[i];
        stx += t[i] * x[i];
        ++n;
    }
    f.points = n;
    if (n < 2) return f;
    const double den = n * stt - st * st;
    if (den <= 0) return f;
    f.slope = (n * stx - st * sx) / den;
    f.intercept = (sx - f.slope * st) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 - 1e-12 || t[i] > t1 + 1e-12 || !std::isfinite(x[i])) continue;
        const double r = x[i] - f.intercept - f.slope * t[i];
        ss += r * r;
        f.max_residual = std::max(f.max_residual, std::abs(r));
    }
    if (n > 2) f.slope_stderr = std::sqrt(ss / (n - 2) * n / den);
    return f;
}

struct MeanSpeeds {
    double c_inf = 0.0, c_sup = 0.0;
    /// Limits of the sup/inf displacement over lag s, divided by s.
    double c_bar_inf = 0.0, c_bar_sup = 0.0;
    double half_width = 0.0;
    bool conclusive = false;
};

/// Mean-speed estimates from a track x(t). The origin is moved to the start
/// of the trailing window t_0 = (1 - f) T to discard the initial transient:
/// c_inf/c_sup are the extremes of (x(t) - x(t_0))/(t - t_0) over the last
/// half of the window, c_bar_* the extremes over lags s in [f T/2, f T] of
/// the sup/inf displacement within the window divided by s.
inline MeanSpeeds mean_speeds(const std::vector<double>& t, const std::vector<double>& x,
                              double window_fraction = 0.75) {
    MeanSpeeds m;
    std::vector<double> tt, xx;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::isfinite(x[i])) {
            tt.push_back(t[i]);
            xx.push_back(x[i]);
        }
    if (tt.size() < 2) return m;
    const double T = tt.back(), t0 = T - window_fraction * (T - tt.front());
    const std::size_t i0 = std::lower_bound(tt.begin(), tt.end(), t0 - 1e-12) - tt.begin();
    const double span = T - tt[i0];
    if (!(span > 0)) return m;
    m.c_inf = detail::kInf;
    m.c_sup = -detail::kInf;
    std::size_t late = 0;
    for (std::size_t i = i0; i < tt.size(); ++i) {
        if (tt[i] < tt[i0] + 0.5 * span - 1e-12) continue;
        const double r = (xx[i] - xx[i0]) / (tt[i] - tt[i0]);
        m.c_inf = std::min(m.c_inf, r);
        m.c_sup = std::max(m.c_sup, r);
        ++late;
    }
    m.c_bar_inf = detail::kInf;
    m.c_bar_sup = -detail::kInf;
    // Displacement extremes over all pairs in the window at each lag index.
    for (std::size_t a = i0; a < tt.size(); ++a)
        for (std::size_t b = a + 1; b < tt.size(); ++b) {
            const double s = tt[b] - tt[a];
            if (s < 0.5 * span - 1e-12) continue;
            const double r = (xx[b] - xx[a]) / s;
            m.c_bar_inf = std::min(m.c_bar_inf, r);
            m.c_bar_sup = std::max(m.c_bar_sup, r);
        }
    const LineFit f = fit_line(tt, xx, tt[i0]);
    m.half_width = 2.0 * f.max_residual / (0.5 * span) + 2.0 * f.slope_stderr;
    m.conclusive = late >= 10;
    return m;
}

/// Exponent of K[u0]: sup over lags s of (c_noesc + kappa)(x_bar(s) - c_bar s)
/// - kappa c_cut s / 4, with x_bar(s) the largest displacement over lag s.
inline double track_beta_bar(const std::vector<double>& t, const std::vector<double>& x, double c_noesc,
                             double kappa, double c_cut, double c_bar) {
    double best = 0.0;
    for (std::size_t a = 0; a < t.size(); ++a)
        for (std::size_t b = a; b < t.size(); ++b) {
            if (!std::isfinite(x[a]) || !std::isfinite(x[b])) continue;
            const double s = t[b] - t[a];
            best = std::max(best, (c_noesc + kappa) * (x[b] - x[a] - c_bar * s) - 0.25 * kappa * c_cut * s);
        }
    return best;
}

}  // namespace rdlab
