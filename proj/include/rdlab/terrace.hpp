/// @file terrace.hpp
/// Decompose late-time states into propagating and standing terraces of
/// profiles taken from a front database, and check the resulting structure.
#pragma once

#include "rdlab/energy.hpp"
#include "rdlab/escape.hpp"
#include "rdlab/front.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace rdlab {

/// The same connection read right to left: xi -> -xi, c -> -c.
inline FrontProfile mirror(const FrontProfile& p) {
    FrontProfile q = p;
    const std::size_t K = p.size();
    const int n = p.n;
    q.c = -p.c;
    q.m_minus = p.m_plus;
    q.m_plus = p.m_minus;
    q.xi_norm = -p.xi_norm;
    q.rate_minus = p.rate_plus;
    q.rate_plus = p.rate_minus;
    for (std::size_t k = 0; k < K; ++k) {
        q.xi[k] = -p.xi[K - 1 - k];
        for (int i = 0; i < n; ++i) {
            q.phi[k * n + i] = p.phi[(K - 1 - k) * n + i];
            q.dphi[k * n + i] = -p.dphi[(K - 1 - k) * n + i];
        }
    }
    return q;
}

/// Profiles loaded from files; lookups return the connection oriented from
/// the left state to the right state.
struct ProfileDb {
    std::vector<FrontProfile> profiles;
    double match_tol = 1e-6;

    const FrontProfile* find(const Vec& left, const Vec& right, FrontProfile& storage) const {
        for (const auto& p : profiles) {
            if ((p.m_minus - left).norm() <= match_tol && (p.m_plus - right).norm() <= match_tol) return &p;
            if ((p.m_minus - right).norm() <= match_tol && (p.m_plus - left).norm() <= match_tol) {
                storage = mirror(p);
                return &storage;
            }
        }
        return nullptr;
    }
};

struct Plateau {
    int minimum = -1;
    double x_lo = 0.0, x_hi = 0.0;
};

struct Transition {
    int from = -1, to = -1;
    /// End of the plateau on the left and start of the one on the right.
    double x_left = 0.0, x_right = 0.0;
    double center() const { return 0.5 * (x_left + x_right); }
};

struct InterfaceScan {
    std::vector<Plateau> plateaus;
    std::vector<Transition> transitions;
    /// The grid does not start or end on a plateau.
    bool unresolved = false;
};

/// Plateaus are maximal runs of nodes within d_Esc of one minimum and at
/// least min_length long; everything between two plateaus is a transition.
inline InterfaceScan detect_interfaces(const FieldState& s, const Catalog& c, double min_length = 2.0) {
    InterfaceScan out;
    const Grid& gr = s.grid;
    std::vector<int> label(gr.N, -1);
    for (int j = 0; j < gr.N; ++j) {
        const int i = c.nearest_minimum(s.value(j));
        if (i >= 0 && std::sqrt(detail::dist2_at(s, j, c.minima[i])) <= c.d_escape) label[j] = i;
    }
    for (int j = 0; j < gr.N;) {
        int k = j;
        while (k + 1 < gr.N && label[k + 1] == label[j]) ++k;
        if (label[j] >= 0 && gr.x(k) - gr.x(j) >= min_length) out.plateaus.push_back({label[j], gr.x(j), gr.x(k)});
        j = k + 1;
    }
    if (out.plateaus.empty()) {
        out.unresolved = true;
        return out;
    }
    out.unresolved = out.plateaus.front().x_lo > gr.x(0) || out.plateaus.back().x_hi < gr.x(gr.N - 1);
    // Adjacent plateaus of the same minimum separated by a short excursion merge.
    std::vector<Plateau> merged;
    for (const auto& p : out.plateaus) {
        if (!merged.empty() && merged.back().minimum == p.minimum && p.x_lo - merged.back().x_hi <= 4.0 * gr.dx)
            merged.back().x_hi = p.x_hi;
        else
            merged.push_back(p);
    }
    out.plateaus = merged;
    for (std::size_t i = 1; i < merged.size(); ++i)
        out.transitions.push_back({merged[i - 1].minimum, merged[i].minimum, merged[i - 1].x_hi, merged[i].x_lo});
    return out;
}

struct TerraceItem {
    int from = -1, to = -1;
    FrontProfile profile;
    /// Fitted positions over the trailing snapshots.
    std::vector<double> times, positions;
    double position = 0.0;
    double speed = 0.0, speed_error = 0.0;
    double fit_residual = 0.0;
    bool travelling = false;
    /// Same direction and speed as a neighbour within the fit errors: at a
    /// finite horizon the pair cannot be told apart from one compound transition.
    bool degenerate = false;
};

struct StructureCheck {
    std::string name;
    bool ok = false;
    std::string detail;
};

struct TerraceFit {
    std::vector<TerraceItem> items;  // left to right
    int right_count = 0, left_count = 0;
    double t = 0.0, epsilon = 0.05, h = 0.0;
    double center_energy = 0.0, residual_energy = 0.0;
    double recon_left = 0.0, recon_center = 0.0, recon_right = 0.0;
    std::vector<StructureCheck> checks;
    std::vector<std::string> warnings;
    bool verdict = false;
};

struct TerraceOptions {
    double min_plateau = 2.0;
    double recon_tol = 2e-2;
    double energy_rel_tol = 1e-2;
    double level_tol = 1e-6;
    double speed_rel_tol = 1e-2;
    /// Fraction of the snapshots (from the end) used for the fit.
    double trailing_fraction = 0.5;
    std::size_t min_snapshots = 10;
};

namespace detail {

/// L^2 misfit of u against phi(x - shift) on nodes [j0, j1].
inline double shift_misfit(const FieldState& s, const FrontProfile& p, double shift, int j0, int j1) {
    double sum = 0.0;
    for (int j = j0; j <= j1; ++j) {
        const Vec d = s.value(j) - p.eval(s.grid.x(j) - shift);
        sum += d.squaredNorm();
    }
    return sum * s.grid.dx;
}

/// Coarse scan then golden-section refinement of the best shift.
inline double fit_shift(const FieldState& s, const FrontProfile& p, double lo, double hi, int j0, int j1) {
    const double step = 0.25;
    double best = lo, bv = kInf;
    for (double x = lo; x <= hi + 1e-12; x += step) {
        const double v = shift_misfit(s, p, x, j0, j1);
        if (v < bv) {
            bv = v;
            best = x;
        }
    }
    double a = best - step, b = best + step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = shift_misfit(s, p, c, j0, j1), fd = shift_misfit(s, p, d, j0, j1);
    while (b - a > 1e-9) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = shift_misfit(s, p, c, j0, j1);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = shift_misfit(s, p, d, j0, j1);
        }
    }
    return 0.5 * (a + b);
}

/// Node window owned by transition i: from the middle of the plateau on its
/// left to the middle of the plateau on its right.
inline std::pair<int, int> item_window(const Grid& gr, const InterfaceScan& scan, std::size_t i) {
    const auto& L = scan.plateaus[i];
    const auto& R = scan.plateaus[i + 1];
    const double a = i == 0 ? gr.x(0) : 0.5 * (L.x_lo + L.x_hi);
    const double b = i + 2 == scan.plateaus.size() ? gr.x(gr.N - 1) : 0.5 * (R.x_lo + R.x_hi);
    const int j0 = std::max(0, static_cast<int>(std::ceil(gr.index_of(a) - 1e-9)));
    const int j1 = std::min(gr.N - 1, static_cast<int>(std::floor(gr.index_of(b) + 1e-9)));
    return {j0, j1};
}

}  // namespace detail

/// Reconstruction m_left_end + sum_i (phi_i(x - x_i) - m_left_i) at x.
inline Vec terrace_reconstruction(const TerraceFit& f, const Catalog& c, double x) {
    Vec r = c.minima[f.items.front().from];
    for (const auto& it : f.items) r += it.profile.eval(x - it.position) - c.minima[it.from];
    return r;
}

/// Energy of (|u_x|^2/2 + V - h) over |x| <= eps t.
inline double residual_asymptotic_energy(const FieldState& s, const Potential& V, double eps, double h) {
    return lab_energy(s, V, h, -eps * s.t, eps * s.t);
}

/// Recompute the structure checks and the verdict from the fitted items.
inline void verify_terrace_structure(TerraceFit& f, const Catalog& c, const TerraceOptions& opt, double dx,
                                     double t_window) {
    const Potential& V = *c.potential;
    f.checks.clear();
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        f.checks.push_back({name, ok, detail});
    };
    const auto& it = f.items;
    const int K = static_cast<int>(it.size());
    auto sign = [](const TerraceItem& a) { return a.travelling ? (a.speed > 0 ? 1 : -1) : 0; };
    bool partition = true;
    for (int i = 1; i < K; ++i)
        if (sign(it[i]) < sign(it[i - 1])) partition = false;
    add("terrace_partition", partition, "left-travelling, standing, right-travelling from left to right");
    f.right_count = f.left_count = 0;
    for (const auto& a : it) {
        if (sign(a) > 0) ++f.right_count;
        if (sign(a) < 0) ++f.left_count;
    }
    bool chain = true;
    for (int i = 1; i < K; ++i)
        if (it[i].from != it[i - 1].to) chain = false;
    add("chained_states", chain);
    // Right terrace, outermost first: speeds non-increasing, levels strictly decreasing inward.
    bool rspeed = true, rlevel = true, lspeed = true, llevel = true;
    for (int i = K - 1; i >= K - f.right_count; --i) {
        if (V.value(c.minima[it[i].to]) <= V.value(c.minima[it[i].from]) + opt.level_tol) rlevel = false;
        if (i < K - 1 && it[i].speed > it[i + 1].speed + it[i].speed_error + it[i + 1].speed_error) rspeed = false;
    }
    for (int i = 0; i < f.left_count; ++i) {
        if (V.value(c.minima[it[i].from]) <= V.value(c.minima[it[i].to]) + opt.level_tol) llevel = false;
        if (i > 0 && it[i].speed < it[i - 1].speed - it[i].speed_error - it[i - 1].speed_error) lspeed = false;
    }
    add("right_speed_order", rspeed);
    add("right_level_order", rlevel);
    add("left_speed_order", lspeed);
    add("left_level_order", llevel);
    bool sep = true;
    for (int i = 1; i < K; ++i) {
        const bool same_terrace = sign(it[i]) == sign(it[i - 1]) && sign(it[i]) != 0;
        if (!same_terrace) continue;
        const auto& a = it[i - 1].positions;
        const auto& b = it[i].positions;
        const std::size_t n = std::min(a.size(), b.size());
        if (n >= 2 && (b[n - 1] - a[n - 1]) < (b.front() - a.front()) - 2.0 * dx) sep = false;
    }
    add("separation_nondecreasing", sep);
    // Center level: the states between the left and right terraces.
    if (K > 0) {
        const int mlb = f.left_count > 0 ? it[f.left_count - 1].to : it.front().from;
        const int mrb = f.right_count > 0 ? it[K - f.right_count].from : it.back().to;
        const double hl = V.value(c.minima[mlb]), hr = V.value(c.minima[mrb]);
        add("center_level", std::abs(hl - hr) <= opt.level_tol, "h_left = " + fmt17(hl) + ", h_right = " + fmt17(hr));
        f.h = std::max(hl, hr);
    } else {
        add("center_level", true, "single state, h = " + fmt17(f.h));
    }
    bool speeds = true;
    std::string sd;
    for (const auto& a : it) {
        const double floor = 2.0 * dx / t_window;
        const double tol = std::max(opt.speed_rel_tol * std::abs(a.profile.c), floor) + a.speed_error;
        if (std::abs(a.speed - a.profile.c) > tol) {
            speeds = false;
            sd += " fitted " + fmt17(a.speed) + " vs profile " + fmt17(a.profile.c) + ";";
        }
    }
    add("speeds_match_profiles", speeds, sd);
    const double rmax = std::max({f.recon_left, f.recon_center, f.recon_right});
    add("reconstruction", rmax <= opt.recon_tol, "sup residual = " + fmt17(rmax));
    const double escale = std::max(1.0, std::abs(f.center_energy));
    add("center_energy", std::abs(f.center_energy - f.residual_energy) <= opt.energy_rel_tol * escale,
        "terrace = " + fmt17(f.center_energy) + ", residual = " + fmt17(f.residual_energy));
    f.verdict = std::all_of(f.checks.begin(), f.checks.end(), [](const StructureCheck& s) { return s.ok; });
}

/// Fit every transition of the trailing snapshots with a database profile,
/// estimate speeds, build the terraces and check the structure.
inline TerraceFit fit_terrace(const std::vector<FieldState>& snaps, const ProfileDb& db, const Catalog& c,
                              const TerraceOptions& opt = {}) {
    if (snaps.size() < opt.min_snapshots)
        throw std::invalid_argument("fit_terrace: need at least " + std::to_string(opt.min_snapshots) + " snapshots");
    const std::size_t from =
        snaps.size() - std::max(opt.min_snapshots, static_cast<std::size_t>(std::ceil(opt.trailing_fraction * snaps.size())));
    const FieldState& last = snaps.back();
    const Grid& gr = last.grid;
    TerraceFit f;
    f.t = last.t;
    const InterfaceScan scan = detect_interfaces(last, c, opt.min_plateau);
    if (scan.unresolved) f.warnings.push_back("grid ends are not on a plateau");
    if (!scan.plateaus.empty()) f.h = c.potential->value(c.minima[scan.plateaus.front().minimum]);
    for (std::size_t i = 0; i < scan.transitions.size(); ++i) {
        const auto& tr = scan.transitions[i];
        TerraceItem item;
        item.from = tr.from;
        item.to = tr.to;
        FrontProfile storage;
        const FrontProfile* p = db.find(c.minima[tr.from], c.minima[tr.to], storage);
        if (!p) {
            f.warnings.push_back("no database profile for transition at x = " + fmt17(tr.center()));
            f.checks.push_back({"profiles_available", false, ""});
            return f;
        }
        item.profile = *p;
        f.items.push_back(std::move(item));
    }
    // Track every final item back through the trailing snapshots.
    for (std::size_t k = from; k < snaps.size(); ++k) {
        const FieldState& s = snaps[k];
        const InterfaceScan sc = detect_interfaces(s, c, opt.min_plateau);
        for (auto& item : f.items) {
            const double guess = item.positions.empty() ? scan.transitions[&item - &f.items[0]].center()
                                                        : item.positions.back();
            int best = -1;
            double bd = detail::kInf;
            for (std::size_t i = 0; i < sc.transitions.size(); ++i) {
                const auto& tr = sc.transitions[i];
                if (tr.from != item.from || tr.to != item.to) continue;
                const double d = std::abs(tr.center() - guess);
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(i);
                }
            }
            if (best < 0) continue;
            const auto [j0, j1] = detail::item_window(gr, sc, best);
            const auto& tr = sc.transitions[best];
            const double x = detail::fit_shift(s, item.profile, tr.x_left - 10.0, tr.x_right + 10.0, j0, j1);
            item.times.push_back(s.t);
            item.positions.push_back(x);
            if (k + 1 == snaps.size()) {
                item.position = x;
                double r = 0.0;
                for (int j = j0; j <= j1; ++j)
                    r = std::max(r, (s.value(j) - item.profile.eval(gr.x(j) - x)).norm());
                item.fit_residual = r;
            }
        }
    }
    const double t_window = snaps.back().t - snaps[from].t;
    double min_speed = detail::kInf;
    for (auto& item : f.items) {
        const LineFit lf = fit_line(item.times, item.positions);
        item.speed = lf.slope;
        item.speed_error = lf.slope_stderr + (t_window > 0 ? gr.dx / t_window : 0.0);
        item.travelling = std::abs(item.speed) > 3.0 * item.speed_error;
        if (item.travelling) min_speed = std::min(min_speed, std::abs(item.speed));
    }
    for (std::size_t i = 1; i < f.items.size(); ++i) {
        TerraceItem& a = f.items[i - 1];
        TerraceItem& b = f.items[i];
        if (a.travelling && b.travelling && (a.speed > 0) == (b.speed > 0) &&
            std::abs(a.speed - b.speed) <= a.speed_error + b.speed_error) {
            a.degenerate = b.degenerate = true;
            f.warnings.push_back("items " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                 " travel at indistinguishable speeds");
        }
    }
    f.epsilon = std::isfinite(min_speed) ? 0.05 * min_speed : 0.05;
    const double w = f.epsilon * f.t;
    if (!f.items.empty()) {
        for (int j = 0; j < gr.N; ++j) {
            const double x = gr.x(j);
            const double r = (last.value(j) - terrace_reconstruction(f, c, x)).norm();
            if (x <= -w) f.recon_left = std::max(f.recon_left, r);
            if (std::abs(x) <= w) f.recon_center = std::max(f.recon_center, r);
            if (x >= w) f.recon_right = std::max(f.recon_right, r);
        }
    }
    // Level from the structure check; energies need it, so verify twice.
    verify_terrace_structure(f, c, opt, gr.dx, t_window);
    std::vector<FrontProfile> standing;
    for (const auto& item : f.items)
        if (!item.travelling) standing.push_back(item.profile);
    try {
        f.center_energy = 0.0;
        for (auto& p : standing) {
            p.c = 0.0;
            f.center_energy += standing_terrace_energy({p}, *c.potential, f.h, opt.level_tol, detail::kInf);
        }
    } catch (const std::exception& e) {
        f.warnings.push_back(e.what());
    }
    f.residual_energy = residual_asymptotic_energy(last, *c.potential, f.epsilon, f.h);
    verify_terrace_structure(f, c, opt, gr.dx, t_window);
    return f;
}

inline void write_terrace_report(std::ostream& os, const TerraceFit& f, const Catalog& c) {
    auto vec = [](const Vec& v) {
        std::string s;
        for (int i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt17(v[i]);
        return s;
    };
    auto line = [&](const TerraceItem& it) {
        os << "item from = " << vec(c.minima[it.from]) << " ; to = " << vec(c.minima[it.to])
           << " ; speed = " << fmt17(it.speed) << " ; speed_error = " << fmt17(it.speed_error)
           << " ; profile_speed = " << fmt17(it.profile.c) << " ; position = " << fmt17(it.position)
           << " ; fit_residual = " << fmt17(it.fit_residual) << (it.degenerate ? " ; degenerate" : "") << "\n";
    };
    const int K = static_cast<int>(f.items.size());
    os << "[right]\n";
    for (int i = K - 1; i >= K - f.right_count; --i) line(f.items[i]);
    os << "[center]\n";
    for (int i = f.left_count; i < K - f.right_count; ++i) line(f.items[i]);
    os << "[left]\n";
    for (int i = 0; i < f.left_count; ++i) line(f.items[i]);
    os << "[checks]\n";
    for (const auto& ch : f.checks)
        os << ch.name << " = " << (ch.ok ? "ok" : "fail") << (ch.detail.empty() ? "" : " ; " + ch.detail) << "\n";
    for (const auto& w : f.warnings) os << "warning = " << w << "\n";
    os << "summary: t = " << fmt17(f.t) << " ; epsilon = " << fmt17(f.epsilon) << " ; h = " << fmt17(f.h)
       << " ; E_center = " << fmt17(f.center_energy) << " ; residual_energy = " << fmt17(f.residual_energy)
       << " ; verdict = " << (f.verdict ? "PASS" : "FAIL") << "\n";
}

}  // namespace rdlab
