/// @file solver.hpp
/// Method-of-lines solver for u_t = -grad V(u) + u_xx on [-X, X] with
/// homogeneous Neumann ends. Crank-Nicolson diffusion, explicit reaction.
#pragma once

#include "rdlab/catalog.hpp"
#include "rdlab/format.hpp"
#include "rdlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlab {

/// Uniform grid x_j = -X + j dx, j = 0..N-1, N = 2 floor(X/dx) + 1.
struct Grid {
    double X = 0.0;
    double dx = 0.0;
    int N = 0;

    static Grid make(double half_length, double dx) {
        if (!(dx > 0.0) || !(half_length >= dx))
            throw ConfigError("grid: need dx > 0 and half_length >= dx");
        Grid g;
        const long half = static_cast<long>(std::floor(half_length / dx + 1e-9));
        g.dx = dx;
        g.N = static_cast<int>(2 * half + 1);
        g.X = half * dx;
        return g;
    }
    double x(int j) const { return -X + j * dx; }
    /// Trapezoid weight of node j (in units of dx).
    double w(int j) const { return (j == 0 || j == N - 1) ? 0.5 : 1.0; }
    /// Fractional node index of position x.
    double index_of(double x) const { return (x + X) / dx; }
};

/// Discrete solution with u_x (central differences, zero at the Neumann
/// ends) and u_t (the discrete right-hand side) cached. Node-major storage.
struct FieldState {
    Grid grid;
    int n = 1;
    double t = 0.0;
    std::vector<double> u, ux, ut;

    double& at(int j, int k = 0) { return u[j * n + k]; }
    double at(int j, int k = 0) const { return u[j * n + k]; }
    Vec value(int j) const { return Eigen::Map<const Vec>(&u[j * n], n); }
    Vec dx_value(int j) const { return Eigen::Map<const Vec>(&ux[j * n], n); }
    Vec dt_value(int j) const { return Eigen::Map<const Vec>(&ut[j * n], n); }
};

namespace detail {

/// (L u)_j for component k, Neumann ghost reflection at both ends.
inline double laplacian(const std::vector<double>& u, int N, int n, int j, int k, double inv_dx2) {
    const double c = u[j * n + k];
    if (j == 0) return 2.0 * (u[n + k] - c) * inv_dx2;
    if (j == N - 1) return 2.0 * (u[(N - 2) * n + k] - c) * inv_dx2;
    return (u[(j + 1) * n + k] - 2.0 * c + u[(j - 1) * n + k]) * inv_dx2;
}

}  // namespace detail

/// Recompute u_x and u_t from u. Bit-exact for a given u.
inline void refresh_caches(FieldState& s, const Potential& V) {
    const int N = s.grid.N, n = s.n;
    const double inv_dx2 = 1.0 / (s.grid.dx * s.grid.dx), inv_2dx = 0.5 / s.grid.dx;
    s.ux.assign(s.u.size(), 0.0);
    s.ut.assign(s.u.size(), 0.0);
    std::vector<double> g(n);
    for (int j = 0; j < N; ++j) {
        V.gradient(&s.u[j * n], g.data());
        for (int k = 0; k < n; ++k) {
            if (j > 0 && j < N - 1) s.ux[j * n + k] = (s.u[(j + 1) * n + k] - s.u[(j - 1) * n + k]) * inv_2dx;
            s.ut[j * n + k] = detail::laplacian(s.u, N, n, j, k, inv_dx2) - g[k];
        }
    }
}

/// Initial condition description. Vector endpoints take n values each.
///   constant:   m
///   front_like: m_minus, m_plus, steepness, center
///   plateau:    m_in, m_out, left, right, steepness
///   samples:    file with rows x u_1..u_n (linear interpolation)
struct InitialCondition {
    std::string kind = "constant";
    std::vector<double> params;
    std::string file;
};

struct InitialState {
    FieldState state;
    std::vector<std::string> warnings;
};

inline InitialState make_initial_state(const Grid& grid, const Potential& V, const InitialCondition& ic,
                                       const Catalog* catalog = nullptr) {
    const int n = V.dim();
    InitialState out;
    FieldState& s = out.state;
    s.grid = grid;
    s.n = n;
    s.t = 0.0;
    s.u.assign(static_cast<std::size_t>(grid.N) * n, 0.0);
    const auto& p = ic.params;
    auto need = [&](std::size_t count) {
        if (p.size() != count)
            throw ConfigError("ic." + ic.kind + " expects " + std::to_string(count) + " parameters, got " +
                              std::to_string(p.size()));
    };
    auto vec_at = [&](std::size_t off) { return Eigen::Map<const Vec>(&p[off], n).eval(); };
    std::vector<Vec> endpoints;
    if (ic.kind == "constant") {
        need(n);
        const Vec m = vec_at(0);
        endpoints.push_back(m);
        for (int j = 0; j < grid.N; ++j)
            for (int k = 0; k < n; ++k) s.at(j, k) = m[k];
    } else if (ic.kind == "front_like") {
        need(2 * n + 2);
        const Vec a = vec_at(0), b = vec_at(n);
        const double steep = p[2 * n], center = p[2 * n + 1];
        endpoints = {a, b};
        for (int j = 0; j < grid.N; ++j) {
            const double r = 0.5 * (1.0 + std::tanh(steep * (grid.x(j) - center)));
            for (int k = 0; k < n; ++k) s.at(j, k) = a[k] + (b[k] - a[k]) * r;
        }
    } else if (ic.kind == "plateau") {
        need(2 * n + 3);
        const Vec in = vec_at(0), outv = vec_at(n);
        const double left = p[2 * n], right = p[2 * n + 1], steep = p[2 * n + 2];
        if (!(right > left)) throw ConfigError("ic.plateau needs left < right");
        endpoints = {in, outv};
        for (int j = 0; j < grid.N; ++j) {
            const double x = grid.x(j);
            const double r = 0.5 * (std::tanh(steep * (x - left)) - std::tanh(steep * (x - right)));
            for (int k = 0; k < n; ++k) s.at(j, k) = outv[k] + (in[k] - outv[k]) * r;
        }
    } else if (ic.kind == "samples") {
        std::ifstream f(ic.file);
        if (!f) throw ConfigError("ic.samples: cannot open '" + ic.file + "'");
        std::vector<double> xs;
        std::vector<std::vector<double>> us;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream is(line);
            double x;
            if (!(is >> x)) continue;
            std::vector<double> row(n);
            for (int k = 0; k < n; ++k)
                if (!(is >> row[k])) throw ConfigError("ic.samples: short row in '" + ic.file + "'");
            xs.push_back(x);
            us.push_back(row);
        }
        if (xs.size() < 2) throw ConfigError("ic.samples: need at least two rows");
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (!(xs[i] > xs[i - 1])) throw ConfigError("ic.samples: x must increase");
        for (int j = 0; j < grid.N; ++j) {
            const double x = std::clamp(grid.x(j), xs.front(), xs.back());
            std::size_t i = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
            i = std::clamp<std::size_t>(i, 1, xs.size() - 1);
            const double r = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            for (int k = 0; k < n; ++k) s.at(j, k) = us[i - 1][k] + r * (us[i][k] - us[i - 1][k]);
        }
        endpoints = {Eigen::Map<const Vec>(us.front().data(), n), Eigen::Map<const Vec>(us.back().data(), n)};
    } else {
        throw ConfigError("unknown ic.kind '" + ic.kind + "'");
    }
    if (catalog) {
        for (const Vec& e : endpoints) {
            const int i = catalog->nearest_minimum(e);
            if (i < 0 || (catalog->minima[i] - e).norm() > 1e-8)
                out.warnings.push_back("initial endpoint is not a minimum point; bistability not guaranteed");
        }
    }
    refresh_caches(s, V);
    return out;
}

/// One-step semi-implicit integrator. The tridiagonal factorization of
/// I - (dt/2) L is computed once.
class Stepper {
public:
    Stepper(PotentialPtr V, const Grid& grid, double dt,
            double dt_max = std::numeric_limits<double>::infinity())
        : V_(std::move(V)), grid_(grid), dt_(dt) {
        if (!(dt > 0.0)) throw ConfigError("time.dt must be positive");
        if (dt > dt_max)
            throw ConfigError("time.dt = " + fmt17(dt) + " exceeds dt_max = " + fmt17(dt_max));
        const int N = grid.N;
        const double r = dt / (2.0 * grid.dx * grid.dx);
        // Rows: (1+2r) diagonal, -r off-diagonal; -2r at the Neumann ends.
        std::vector<double> lo(N, -r), di(N, 1.0 + 2.0 * r), up(N, -r);
        up[0] = -2.0 * r;
        lo[N - 1] = -2.0 * r;
        cp_.assign(N, 0.0);
        inv_.assign(N, 0.0);
        lo_ = lo;
        inv_[0] = 1.0 / di[0];
        cp_[0] = up[0] * inv_[0];
        for (int j = 1; j < N; ++j) {
            inv_[j] = 1.0 / (di[j] - lo[j] * cp_[j - 1]);
            cp_[j] = up[j] * inv_[j];
        }
    }

    double dt() const { return dt_; }
    const Grid& grid() const { return grid_; }
    const Potential& potential() const { return *V_; }

    /// Advance u in place by one step. Returns false on a non-finite value.
    bool advance(std::vector<double>& u, int n) {
        const int N = grid_.N;
        const double inv_dx2 = 1.0 / (grid_.dx * grid_.dx);
        rhs_.resize(u.size());
        g_.resize(n);
        for (int j = 0; j < N; ++j) {
            V_->gradient(&u[j * n], g_.data());
            for (int k = 0; k < n; ++k)
                rhs_[j * n + k] = u[j * n + k] + 0.5 * dt_ * detail::laplacian(u, N, n, j, k, inv_dx2) - dt_ * g_[k];
        }
        double check = 0.0;
        for (int k = 0; k < n; ++k) {
            // Forward sweep then back substitution.
            double prev = rhs_[k] * inv_[0];
            u[k] = prev;
            for (int j = 1; j < N; ++j) {
                prev = (rhs_[j * n + k] - lo_[j] * prev) * inv_[j];
                u[j * n + k] = prev;
            }
            for (int j = N - 2; j >= 0; --j) u[j * n + k] -= cp_[j] * u[(j + 1) * n + k];
            for (int j = 0; j < N; ++j) check += u[j * n + k];
        }
        return std::isfinite(check);
    }

    /// One full step with caches refreshed.
    FieldState step(const FieldState& s) {
        FieldState out = s;
        if (!advance(out.u, out.n)) throw_blowup(out);
        out.t = s.t + dt_;
        refresh_caches(out, *V_);
        return out;
    }

    [[noreturn]] void throw_blowup(const FieldState& s) const {
        int where = 0;
        for (int j = 0; j < grid_.N; ++j)
            for (int k = 0; k < s.n; ++k)
                if (!std::isfinite(s.u[j * s.n + k])) {
                    where = j;
                    j = grid_.N;
                    break;
                }
        throw BlowUpError("solver blow-up at x = " + fmt17(grid_.x(where)) + " near t = " + fmt17(s.t + dt_));
    }

private:
    PotentialPtr V_;
    Grid grid_;
    double dt_;
    std::vector<double> cp_, inv_, lo_, rhs_, g_;
};

/// Strided snapshots plus observer hooks.
struct Trajectory {
    std::vector<FieldState> states;
    std::vector<double> times;
    /// (time, position) of boundary-proximity alarms.
    std::vector<std::pair<double, double>> boundary_alarms;
    int record_stride = 1;
    int snapshot_stride = 1;
};

using Observer = std::function<void(const FieldState&)>;

/// Observer fired at t = 0 and every `stride` steps.
struct ScheduledObserver {
    Observer fn;
    int stride = 1;
};

struct EvolveOptions {
    int record_stride = 1;
    std::size_t max_snapshots = 2000;
    bool keep_snapshots = true;
    /// Catalog for the boundary-proximity alarm (optional).
    const Catalog* catalog = nullptr;
    double boundary_margin = 10.0;
};

/// First node within `margin` of either end whose value is farther than
/// d_Esc from every minimum; NaN if none.
inline double boundary_interface(const FieldState& s, const Catalog& c, double margin) {
    const int N = s.grid.N;
    const int band = std::min(N, static_cast<int>(std::ceil(margin / s.grid.dx)));
    auto bad = [&](int j) {
        const Vec u = s.value(j);
        const int i = c.nearest_minimum(u);
        return (c.minima[i] - u).norm() > c.d_escape;
    };
    for (int j = 0; j < band; ++j) {
        if (bad(j)) return s.grid.x(j);
        if (bad(N - 1 - j)) return s.grid.x(N - 1 - j);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Integrate to t_final. Scheduled observers fire at t = 0 and every
/// `stride` steps; snapshots are taken every record_stride steps and thinned
/// so that at most max_snapshots are stored.
inline Trajectory evolve(const FieldState& initial, Stepper& stepper, double t_final,
                         const std::vector<ScheduledObserver>& observers, const EvolveOptions& opt = {}) {
    if (opt.record_stride < 1) throw ConfigError("time.record_stride must be >= 1");
    for (const auto& ob : observers)
        if (ob.stride < 1) throw ConfigError("observer stride must be >= 1");
    const double dt = stepper.dt();
    const long steps = static_cast<long>(std::llround((t_final - initial.t) / dt));
    if (steps < 0) throw ConfigError("time.t_final precedes the initial time");
    Trajectory traj;
    traj.record_stride = opt.record_stride;
    const long records = steps / opt.record_stride + 1;
    const long cap = static_cast<long>(std::max<std::size_t>(1, opt.max_snapshots));
    traj.snapshot_stride = static_cast<int>(std::max<long>(1, (records + cap - 1) / cap));
    FieldState s = initial;
    const double t0 = initial.t;
    auto visit = [&](long step) {
        for (const auto& ob : observers)
            if (step % ob.stride == 0) ob.fn(s);
        if (step % opt.record_stride != 0) return;
        const long r = step / opt.record_stride;
        if (opt.keep_snapshots && r % traj.snapshot_stride == 0) {
            traj.states.push_back(s);
            traj.times.push_back(s.t);
        }
        if (opt.catalog) {
            const double x = boundary_interface(s, *opt.catalog, opt.boundary_margin);
            if (!std::isnan(x)) traj.boundary_alarms.emplace_back(s.t, x);
        }
    };
    auto due = [&](long step) {
        if (step % opt.record_stride == 0) return true;
        for (const auto& ob : observers)
            if (step % ob.stride == 0) return true;
        return false;
    };
    refresh_caches(s, stepper.potential());
    visit(0);
    for (long k = 1; k <= steps; ++k) {
        if (!stepper.advance(s.u, s.n)) {
            s.t = t0 + (k - 1) * dt;
            stepper.throw_blowup(s);
        }
        // Times from the step count, so long runs do not accumulate round-off.
        s.t = t0 + k * dt;
        if (due(k)) {
            refresh_caches(s, stepper.potential());
            visit(k);
        }
    }
    // The final state is always kept.
    if (opt.keep_snapshots && (traj.times.empty() || traj.times.back() != s.t)) {
        refresh_caches(s, stepper.potential());
        traj.states.push_back(s);
        traj.times.push_back(s.t);
    }
    return traj;
}

/// Same, with every observer on the record stride.
inline Trajectory evolve(const FieldState& initial, Stepper& stepper, double t_final,
                         const std::vector<Observer>& observers, const EvolveOptions& opt = {}) {
    std::vector<ScheduledObserver> sched;
    for (const auto& o : observers) sched.push_back({o, opt.record_stride});
    return evolve(initial, stepper, t_final, sched, opt);
}

struct Boundedness {
    double sup_norm = 0.0;
    double h1ul_norm = 0.0;
    bool within_ball = false;
};

/// Sup norm, uniformly-local H^1 norm over unit windows, and comparison with
/// the attracting radii.
inline Boundedness boundedness_monitor(const FieldState& s, const Catalog& c) {
    Boundedness b;
    const int N = s.grid.N, n = s.n;
    std::vector<double> dens(N);
    for (int j = 0; j < N; ++j) {
        double a = 0.0, d = 0.0;
        for (int k = 0; k < n; ++k) {
            a += s.u[j * n + k] * s.u[j * n + k];
            d += s.ux[j * n + k] * s.ux[j * n + k];
        }
        b.sup_norm = std::max(b.sup_norm, std::sqrt(a));
        dens[j] = a + d;
    }
    const int win = std::max(1, static_cast<int>(std::llround(1.0 / s.grid.dx)));
    // Sliding trapezoid over windows of length one.
    std::vector<double> cum(N, 0.0);
    for (int j = 1; j < N; ++j) cum[j] = cum[j - 1] + 0.5 * (dens[j] + dens[j - 1]) * s.grid.dx;
    for (int j = 0; j + win < N || j == 0; ++j) {
        const int e = std::min(N - 1, j + win);
        b.h1ul_norm = std::max(b.h1ul_norm, std::sqrt(cum[e] - cum[j]));
        if (e == N - 1) break;
    }
    b.within_ball = b.sup_norm <= c.r_att_inf && b.h1ul_norm <= c.r_att_x;
    return b;
}

/// Plain-text table: x, u_1..u_n, (u_x)_1..(u_x)_n, (u_t)_1..(u_t)_n.
inline void write_snapshot(std::ostream& os, const FieldState& s) {
    os << "# t = " << fmt17(s.t) << "\n";
    for (int j = 0; j < s.grid.N; ++j) {
        os << fmt17(s.grid.x(j));
        for (int k = 0; k < s.n; ++k) os << " " << fmt17(s.u[j * s.n + k]);
        for (int k = 0; k < s.n; ++k) os << " " << fmt17(s.ux[j * s.n + k]);
        for (int k = 0; k < s.n; ++k) os << " " << fmt17(s.ut[j * s.n + k]);
        os << "\n";
    }
}

}  // namespace rdlab
