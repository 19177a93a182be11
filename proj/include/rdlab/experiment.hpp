/// @file experiment.hpp
/// Configuration-driven pipelines: catalog, front database, evolution with
/// streamed diagnostics, terrace analysis and the audit summary.
#pragma once

#include "rdlab/catalog.hpp"
#include "rdlab/config.hpp"
#include "rdlab/energy.hpp"
#include "rdlab/escape.hpp"
#include "rdlab/front.hpp"
#include "rdlab/solver.hpp"
#include "rdlab/terrace.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace rdlab {

namespace fs = std::filesystem;

struct FrontRequest {
    Vec m_minus, m_plus;
    double c_lo = 0.0, c_hi = 0.0;
};

struct ExperimentConfig {
    std::string potential_name;
    std::vector<double> potential_params;
    double X = 50.0, dx = 0.05, dt = 1e-3, t_final = 10.0;
    int record_stride = 100;
    int energy_stride = 10;
    std::size_t max_snapshots = 200;
    InitialCondition ic;
    double ic_noise = 0.0;
    std::uint64_t seed = 0;

    bool energy = true, firewall = true, escape = true, travel = false, standing = false, terrace = true;
    double energy_level = 0.0;
    double boundary_margin = 10.0;
    double anchor = -1.0;
    std::optional<Vec> m_plus, m_minus, firewall_minimum;
    std::optional<double> delta_speed_plus, delta_speed_minus;

    std::optional<double> travel_speed;
    double travel_t_init = -1.0;
    std::vector<double> travel_cuts{0.0, 20.0};
    double standing_speed = 0.0;

    /// Explicit front requests; empty means every admissible pair of minima.
    std::vector<FrontRequest> front_requests;
    std::optional<std::pair<double, double>> front_bracket;

    double audit_tol = 1e-3;
    double energy_tol = 5e-3;
    /// Start of the dissipation-identity audit (skips a nonsmooth start).
    double energy_audit_from = 0.0;
    TerraceOptions terrace_opt;
    int snapshot_files = 8;
};

inline ExperimentConfig parse_experiment(const Config& c, const std::string& base_dir, bool strict) {
    ExperimentConfig e;
    e.potential_name = c.require_string("potential.name");
    e.potential_params = c.get_doubles("potential.params");
    e.X = c.require_double("grid.half_length");
    e.dx = c.require_double("grid.dx");
    e.dt = c.require_double("time.dt");
    e.t_final = c.require_double("time.t_final");
    e.record_stride = static_cast<int>(c.get_int("time.record_stride", e.record_stride));
    e.energy_stride = static_cast<int>(c.get_int("time.energy_stride", e.energy_stride));
    e.max_snapshots = static_cast<std::size_t>(c.get_int("time.max_snapshots", static_cast<long>(e.max_snapshots)));
    e.ic.kind = c.require_string("ic.kind");
    e.ic.params = c.get_doubles("ic.params");
    e.ic.file = c.get_string("ic.file", "");
    if (!e.ic.file.empty() && fs::path(e.ic.file).is_relative()) e.ic.file = (fs::path(base_dir) / e.ic.file).string();
    e.ic_noise = c.get_double("ic.noise", 0.0);
    e.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    e.energy = c.get_bool("diagnostics.energy", e.energy);
    e.firewall = c.get_bool("diagnostics.firewall", e.firewall);
    e.escape = c.get_bool("diagnostics.escape", e.escape);
    e.travel = c.get_bool("diagnostics.travel_scheme", e.travel);
    e.standing = c.get_bool("diagnostics.standing_scheme", e.standing);
    e.terrace = c.get_bool("diagnostics.terrace", e.terrace);
    e.energy_level = c.get_double("energy.level", 0.0);
    e.boundary_margin = c.get_double("escape.boundary_margin", e.boundary_margin);
    e.anchor = c.get_double("escape.anchor", -1.0);
    auto opt_vec = [&](const std::string& key) -> std::optional<Vec> {
        const auto v = c.get_doubles(key);
        if (v.empty()) return std::nullopt;
        return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size())).eval();
    };
    e.m_plus = opt_vec("escape.m_plus");
    e.m_minus = opt_vec("escape.m_minus");
    e.firewall_minimum = opt_vec("firewall.minimum");
    auto opt_num = [&](const std::string& key) -> std::optional<double> {
        const std::string v = c.get_string(key, "auto");
        if (v == "auto") return std::nullopt;
        return Config::to_double(key, v);
    };
    e.delta_speed_plus = opt_num("escape.delta_speed_plus");
    e.delta_speed_minus = opt_num("escape.delta_speed_minus");
    e.travel_speed = opt_num("travel.speed");
    e.travel_t_init = c.get_double("travel.t_init", -1.0);
    e.travel_cuts = c.get_doubles("travel.cuts", e.travel_cuts);
    e.standing_speed = c.get_double("standing.speed", 0.0);
    const auto br = c.get_doubles("fronts.bracket");
    if (!br.empty()) {
        if (br.size() != 2) throw ConfigError("fronts.bracket takes two numbers");
        e.front_bracket = std::make_pair(br[0], br[1]);
    }
    for (const auto& g : c.get_groups("fronts.requests")) {
        if (g.size() % 2 != 0) throw ConfigError("fronts.requests: each group needs m_minus and m_plus");
        const long n = static_cast<long>(g.size() / 2);
        FrontRequest r;
        r.m_minus = Eigen::Map<const Vec>(g.data(), n);
        r.m_plus = Eigen::Map<const Vec>(g.data() + n, n);
        e.front_requests.push_back(r);
    }
    e.audit_tol = c.get_double("audit.tolerance", e.audit_tol);
    e.energy_tol = c.get_double("audit.energy_tolerance", e.energy_tol);
    e.energy_audit_from = c.get_double("audit.energy_from", e.energy_audit_from);
    e.terrace_opt.recon_tol = c.get_double("terrace.reconstruction_tolerance", e.terrace_opt.recon_tol);
    e.terrace_opt.energy_rel_tol = c.get_double("terrace.energy_tolerance", e.terrace_opt.energy_rel_tol);
    e.terrace_opt.min_plateau = c.get_double("terrace.min_plateau", e.terrace_opt.min_plateau);
    e.snapshot_files = static_cast<int>(c.get_int("output.snapshot_files", e.snapshot_files));
    if (strict) {
        e.audit_tol /= 2.0;
        e.energy_tol /= 2.0;
        e.terrace_opt.recon_tol /= 2.0;
        e.terrace_opt.energy_rel_tol /= 2.0;
        e.terrace_opt.speed_rel_tol /= 2.0;
    }
    const auto left = c.unused();
    if (!left.empty()) throw ConfigError("unknown config key '" + left.front() + "'");
    if (e.record_stride < 1 || e.energy_stride < 1) throw ConfigError("strides must be >= 1");
    if (!(e.t_final > 0.0)) throw ConfigError("time.t_final must be positive");
    return e;
}

inline ExperimentConfig load_experiment(const std::string& path, bool strict = false) {
    const Config c = Config::load(path);
    return parse_experiment(c, fs::path(path).parent_path().string(), strict);
}

inline std::string vec_str(const Vec& v) {
    std::string s;
    for (int i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt17(v[i]);
    return s;
}

// -------------------------------------------------------------- catalog

inline Catalog catalog_for(const ExperimentConfig& e) {
    return build_catalog(make_potential(e.potential_name, e.potential_params));
}

inline void write_text(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    f << s;
}

// -------------------------------------------------------- front database

struct FrontRecord {
    FrontRequest request;
    bool solved = false;
    double c = 0.0;
    std::string file, message;
    FrontProfile profile;
};

/// Every ordered pair (a, b) of minima with V(a) < V(b), and each unordered
/// pair at equal level.
inline std::vector<FrontRequest> default_front_requests(const Catalog& c,
                                                        std::optional<std::pair<double, double>> bracket) {
    const Potential& V = *c.potential;
    std::vector<FrontRequest> out;
    const double c_hi = 2.0 * std::sqrt(c.hessian_bound) + 1.0;
    const double level_tol = 1e-9;
    for (std::size_t a = 0; a < c.minima.size(); ++a)
        for (std::size_t b = 0; b < c.minima.size(); ++b) {
            if (a == b) continue;
            const double va = V.value(c.minima[a]), vb = V.value(c.minima[b]);
            FrontRequest r{c.minima[a], c.minima[b], 0.0, 0.0};
            if (va < vb - level_tol) {
                r.c_lo = 1e-3;
                r.c_hi = c_hi;
            } else if (std::abs(va - vb) <= level_tol && a < b) {
                r.c_lo = -0.5;
                r.c_hi = 0.5;
            } else {
                continue;
            }
            if (bracket) std::tie(r.c_lo, r.c_hi) = *bracket;
            out.push_back(r);
        }
    return out;
}

/// Solve each request, write one profile per connection and a summary table.
/// Failures are recorded and do not stop the build.
inline std::vector<FrontRecord> build_front_db(const ExperimentConfig& e, const Catalog& c, const fs::path& dir) {
    std::vector<FrontRequest> reqs = e.front_requests;
    if (reqs.empty()) reqs = default_front_requests(c, e.front_bracket);
    fs::create_directories(dir);
    std::vector<FrontRecord> out;
    int idx = 0;
    for (FrontRequest r : reqs) {
        FrontRecord rec;
        if (r.c_lo == 0.0 && r.c_hi == 0.0) {
            const auto d = default_front_requests(c, e.front_bracket);
            r.c_lo = e.front_bracket ? e.front_bracket->first : -0.5;
            r.c_hi = e.front_bracket ? e.front_bracket->second : 2.0 * std::sqrt(c.hessian_bound) + 1.0;
            for (const auto& q : d)
                if ((q.m_minus - r.m_minus).norm() < 1e-9 && (q.m_plus - r.m_plus).norm() < 1e-9) {
                    r.c_lo = q.c_lo;
                    r.c_hi = q.c_hi;
                }
        }
        rec.request = r;
        try {
            const int im = c.nearest_minimum(r.m_minus), ip = c.nearest_minimum(r.m_plus);
            if (r.m_minus.size() != c.potential->dim() || r.m_plus.size() != c.potential->dim())
                throw NoConnectionError("endpoint dimension mismatch");
            if ((c.minima[im] - r.m_minus).norm() > 1e-6 || (c.minima[ip] - r.m_plus).norm() > 1e-6)
                throw NoConnectionError("endpoint is not a minimum point of the catalog");
            const SpeedSolution sol = solve_speed(*c.potential, c.minima[im], c.minima[ip], r.c_lo, r.c_hi);
            rec.profile = normalize(sol.profile, c.d_escape);
            rec.c = rec.profile.c;
            rec.solved = true;
            for (const auto& w : sol.warnings) rec.message += w + "; ";
            rec.file = "front_" + std::to_string(idx) + ".dat";
            std::ofstream f(dir / rec.file);
            write_profile(f, rec.profile);
        } catch (const std::exception& ex) {
            rec.message = ex.what();
        }
        out.push_back(rec);
        ++idx;
    }
    std::ofstream s(dir / "summary.csv");
    s << "m_minus,m_plus,status,speed,file,message\n";
    for (const auto& r : out) {
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        s << vec_str(r.request.m_minus) << "," << vec_str(r.request.m_plus) << "," << (r.solved ? "solved" : "failed")
          << "," << (r.solved ? fmt17(r.c) : "nan") << "," << r.file << "," << msg << "\n";
    }
    return out;
}

inline ProfileDb load_front_db(const fs::path& dir, const std::vector<FrontRecord>& recs) {
    ProfileDb db;
    for (const auto& r : recs)
        if (r.solved) db.profiles.push_back(load_profile((dir / r.file).string()));
    return db;
}

// ------------------------------------------------------------------ run

struct RunResult {
    int exit_code = 0;
    std::vector<std::pair<std::string, bool>> verdicts;
    std::map<std::string, std::string> values;
    std::vector<std::string> warnings;
    Catalog catalog;
    std::vector<FrontRecord> fronts;
    EnergySeries energy;
    DissipationResidual dissipation;
    FirewallAudit firewall;
    EscapeTrack track;
    TrackAudit track_audit;
    MeanSpeeds speeds_plus, speeds_minus;
    std::vector<SchemeSeries> travel;
    std::optional<StandingSeries> standing;
    std::optional<TerraceFit> terrace;
    Trajectory trajectory;
    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.second) return false;
        return true;
    }
};

namespace detail {

/// Fastest database speed for fronts entering m from the left (side +1) or,
/// mirrored, from the right (side -1).
inline double db_speed_into(const std::vector<FrontRecord>& recs, const Vec& m, int side) {
    double best = 0.0;
    for (const auto& r : recs) {
        if (!r.solved) continue;
        if (side > 0 && (r.profile.m_plus - m).norm() < 1e-6 && r.c > best) best = r.c;
        if (side < 0 && (r.profile.m_plus - m).norm() < 1e-6 && r.c > 0.0 && -r.c < best) best = -r.c;
    }
    return best;
}

}  // namespace detail

/// Full pipeline. Writes every artifact into `out` and fills the result; the
/// exit code is 0 iff every enabled audit passes.
inline RunResult run_experiment(const ExperimentConfig& e, const fs::path& out) {
    RunResult R;
    fs::create_directories(out);
    R.catalog = catalog_for(e);
    const Catalog& cat = R.catalog;
    const PotentialPtr V = cat.potential;
    {
        std::ostringstream os;
        write_catalog(os, cat);
        write_text(out / "catalog.txt", os.str());
    }
    const Grid grid = Grid::make(e.X, e.dx);
    Stepper stepper(V, grid, e.dt, cat.dt_max());
    InitialState init = make_initial_state(grid, *V, e.ic, &cat);
    R.warnings = init.warnings;
    if (e.ic_noise > 0.0) {
        std::mt19937_64 rng(e.seed);
        std::uniform_real_distribution<double> u(-e.ic_noise, e.ic_noise);
        for (double& x : init.state.u) x += u(rng);
        refresh_caches(init.state, *V);
    }
    const FieldState& s0 = init.state;
    const int n = s0.n;
    auto end_minimum = [&](int j) { return cat.minima[cat.nearest_minimum(s0.value(j))]; };
    const Vec m_plus = e.m_plus.value_or(end_minimum(grid.N - 1));
    const Vec m_minus = e.m_minus.value_or(end_minimum(0));
    if (m_plus.size() != n || m_minus.size() != n) throw ConfigError("escape minima have the wrong dimension");

    const fs::path front_dir = out / "fronts";
    if (e.terrace || e.escape || e.travel) R.fronts = build_front_db(e, cat, front_dir);

    // Streaming diagnostics.
    std::vector<ScheduledObserver> obs;
    if (e.energy) obs.push_back({energy_observer(R.energy, *V, e.energy_level), e.energy_stride});
    std::optional<LabFirewallAuditor> fw;
    if (e.firewall) {
        fw.emplace(cat, e.firewall_minimum.value_or(m_plus), e.audit_tol);
        obs.push_back({[&](const FieldState& s) { fw->observe(s); }, e.record_stride});
    }
    const SchemeConstants K = scheme_constants(cat);
    std::optional<EscapeTracker> tracker;
    std::vector<TravelScheme> travel;
    const double c_plus = e.delta_speed_plus.value_or(detail::db_speed_into(R.fronts, m_plus, +1));
    const double c_minus = e.delta_speed_minus.value_or(detail::db_speed_into(R.fronts, m_minus, -1));
    if (e.escape || e.travel) {
        TrackerOptions to;
        to.m_plus = m_plus;
        to.m_minus = m_minus;
        to.c_plus = c_plus;
        to.c_minus = c_minus;
        to.boundary_margin = e.boundary_margin;
        to.anchor = e.anchor >= 0.0 ? e.anchor : grid.X - e.boundary_margin;
        tracker.emplace(cat, to);
    }
    if (e.travel) {
        const double c = e.travel_speed.value_or(c_plus);
        for (double ell : e.travel_cuts) {
            WeightSpec w;
            w.c = c;
            w.ell = ell;
            w.t_init = e.travel_t_init >= 0.0 ? e.travel_t_init : e.t_final / 4.0;
            w.s_fin = e.t_final - w.t_init;
            w.m = m_plus;
            travel.emplace_back(cat, K, w);
        }
    }
    if (tracker) {
        obs.push_back({[&](const FieldState& s) {
                           tracker->observe(s);
                           const auto& tr = tracker->track();
                           for (auto& ts : travel) ts.observe(s, tr.x_esc_plus.back(), tr.x_hom_plus.back());
                       },
                       e.record_stride});
    }
    std::optional<StandingScheme> standing;
    if (e.standing) {
        standing.emplace(cat, K, e.standing_speed, m_minus, m_plus);
        obs.push_back({[&](const FieldState& s) { standing->observe(s); }, e.record_stride});
    }
    EvolveOptions eo;
    eo.record_stride = e.record_stride;
    eo.max_snapshots = e.max_snapshots;
    eo.keep_snapshots = true;
    eo.catalog = &cat;
    eo.boundary_margin = e.boundary_margin;
    R.trajectory = evolve(s0, stepper, e.t_final, obs, eo);
    const auto& snaps = R.trajectory.states;

    auto verdict = [&](const std::string& k, bool ok) { R.verdicts.emplace_back(k, ok); };
    auto value = [&](const std::string& k, double v) { R.values[k] = fmt17(v); };
    if (e.travel || e.standing) {
        // The admissible constant set the scheme audits were run with.
        for (const auto& [k, v] : {std::pair{"kappa", K.kappa}, {"c_cut", K.c_cut}, {"Lambda", K.Lambda}, {"K_E", K.K_E},
                                   {"nu_fire", K.nu}, {"K_F", K.K_F}, {"K_D", K.K_D}, {"c_cut0", K.c_cut0},
                                   {"nu_tilde", K.nu_tilde}})
            value(std::string("scheme.") + k, v);
    }
    value("boundary_alarms", static_cast<double>(R.trajectory.boundary_alarms.size()));
    value("dt_max", cat.dt_max());

    if (e.energy) {
        R.dissipation = dissipation_residual(R.energy, e.energy_audit_from);
        std::ofstream f(out / "energy.csv");
        f << "t,E,dissipation\n";
        for (std::size_t i = 0; i < R.energy.t.size(); ++i)
            f << fmt17(R.energy.t[i]) << "," << fmt17(R.energy.E[i]) << "," << fmt17(R.energy.D[i]) << "\n";
        value("energy.residual_max_abs", R.dissipation.max_abs);
        value("energy.residual_max_rel", R.dissipation.max_rel);
        verdict("energy.dissipation_identity", R.dissipation.max_rel <= e.energy_tol);
    }
    if (fw) {
        R.firewall = fw->result();
        value("firewall.checks", static_cast<double>(R.firewall.checks));
        value("firewall.violations", static_cast<double>(R.firewall.violations));
        value("firewall.worst_excess", R.firewall.worst_excess);
        value("firewall.tolerance", R.firewall.tol);
        value("firewall.implication_checks", static_cast<double>(R.firewall.implication_checks));
        value("firewall.counterexamples", static_cast<double>(R.firewall.counterexamples));
        verdict("firewall.decrease", R.firewall.worst_excess <= R.firewall.tol);
        verdict("firewall.escape_implication", R.firewall.counterexamples == 0);
    }
    if (tracker) {
        R.track = tracker->track();
        {
            std::ofstream f(out / "track.csv");
            write_track_csv(f, R.track);
        }
        R.track_audit = audit_track(R.track, cat.c_noesc);
        R.speeds_plus = mean_speeds(R.track.t, R.track.x_esc_plus);
        R.speeds_minus = mean_speeds(R.track.t, R.track.x_esc_minus);
        for (const auto& [side, m] : {std::pair{"plus", R.speeds_plus}, std::pair{"minus", R.speeds_minus}}) {
            const std::string p = std::string("escape.") + side + ".";
            value(p + "c_inf", m.c_inf);
            value(p + "c_sup", m.c_sup);
            value(p + "c_bar_inf", m.c_bar_inf);
            value(p + "c_bar_sup", m.c_bar_sup);
            value(p + "half_width", m.half_width);
        }
        value("escape.delta_speed_plus", c_plus);
        value("escape.delta_speed_minus", c_minus);
        if (e.escape) {
            verdict("escape.ordering", R.track_audit.ordering_violations == 0);
            verdict("escape.growth_bound", R.track_audit.growth_violations == 0);
        }
    }
    for (std::size_t i = 0; i < travel.size(); ++i) {
        const double beta = track_beta_bar(R.track.t, R.track.x_esc_plus, cat.c_noesc, K.kappa, K.c_cut,
                                           R.speeds_plus.c_bar_sup);
        R.travel.push_back(travel[i].finish(beta, e.audit_tol));
        const SchemeSeries& s = R.travel.back();
        {
            std::ofstream f(out / ("travel_" + std::to_string(i) + ".csv"));
            write_scheme_csv(f, s);
        }
        const std::string p = "travel." + std::to_string(i) + ".";
        value(p + "speed", s.spec.c);
        value(p + "ell", s.spec.ell);
        value(p + "t_init", s.spec.t_init);
        value(p + "x_init", s.spec.x_init);
        value(p + "log_shift", s.log_shift);
        verdict(p + "energy_inequality", s.energy_ineq_ok);
        verdict(p + "firewall_inequality", s.firewall_ineq_ok);
        verdict(p + "final_inequality", s.final_ok);
        verdict(p + "flux_back_bound", s.g_back_ok);
        verdict(p + "dissipation_growth", s.dissipation_growth_ok);
    }
    if (standing) {
        R.standing = standing->finish(e.audit_tol);
        std::ofstream f(out / "standing.csv");
        write_standing_csv(f, *R.standing);
        value("standing.asymptotic_energy", R.standing->asymptotic_energy);
        verdict("standing.energy_inequality", R.standing->energy_ineq_ok);
        verdict("standing.firewall_inequality", R.standing->firewall_ok);
        verdict("standing.local_firewall_inequality", R.standing->local_firewall_ok);
        verdict("standing.asymptotic_energy_nonnegative", R.standing->asymptotic_energy >= -e.audit_tol * R.standing->scale);
    }
    if (e.terrace) {
        try {
            const ProfileDb db = load_front_db(front_dir, R.fronts);
            R.terrace = fit_terrace(snaps, db, cat, e.terrace_opt);
            std::ofstream f(out / "terrace.txt");
            write_terrace_report(f, *R.terrace, cat);
            value("terrace.right_count", R.terrace->right_count);
            value("terrace.left_count", R.terrace->left_count);
            value("terrace.center_energy", R.terrace->center_energy);
            value("terrace.residual_energy", R.terrace->residual_energy);
            verdict("terrace.structure", R.terrace->verdict);
        } catch (const TrackingError&) {
            throw;
        } catch (const std::invalid_argument& ex) {
            R.warnings.push_back(std::string("terrace: ") + ex.what());
            verdict("terrace.structure", false);
        }
    }
    // Strided snapshot files.
    if (!snaps.empty() && e.snapshot_files > 0) {
        fs::create_directories(out / "snapshots");
        const std::size_t K = snaps.size();
        const std::size_t every = std::max<std::size_t>(1, (K + e.snapshot_files - 1) / e.snapshot_files);
        for (std::size_t i = 0; i < K; ++i) {
            if (i % every != 0 && i + 1 != K) continue;
            std::ofstream f(out / "snapshots" / ("snapshot_" + std::to_string(i) + ".txt"));
            write_snapshot(f, snaps[i]);
        }
    }
    R.exit_code = R.all_pass() ? 0 : 1;
    std::ostringstream sm;
    for (const auto& [k, ok] : R.verdicts) sm << "audit." << k << " = " << (ok ? "pass" : "fail") << "\n";
    for (const auto& [k, v] : R.values) sm << k << " = " << v << "\n";
    for (const auto& w : R.warnings) sm << "warning = " << w << "\n";
    sm << "overall = " << (R.exit_code == 0 ? "pass" : "fail") << "\n";
    write_text(out / "summary.txt", sm.str());
    return R;
}

}  // namespace rdlab
