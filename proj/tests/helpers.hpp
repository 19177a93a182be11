// Closed-form states shared by the test files.
#pragma once

#include "rdlab/solver.hpp"

#include <cmath>
#include <functional>

namespace rdlab::testing {

inline const double kSqrt2 = std::sqrt(2.0);
/// Speed of the cubic bistable front with parameter a: sqrt(2) (1/2 - a).
inline double cb_speed(double a) { return kSqrt2 * (0.5 - a); }
/// Travelling front 1 / (1 + e^{xi / sqrt 2}) joining 1 (left) to 0 (right).
inline double cb_front(double xi) { return 1.0 / (1.0 + std::exp(xi / kSqrt2)); }
/// Stationary double-well kink.
inline double dw_kink(double x) { return std::tanh(x / kSqrt2); }

/// Scalar state sampled from f with caches refreshed.
inline FieldState scalar_state(const Grid& g, const Potential& V, const std::function<double(double)>& f,
                               double t = 0.0) {
    FieldState s;
    s.grid = g;
    s.n = 1;
    s.t = t;
    s.u.resize(g.N);
    for (int j = 0; j < g.N; ++j) s.u[j] = f(g.x(j));
    refresh_caches(s, V);
    return s;
}

inline Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace rdlab::testing
