/// @file potential.hpp
/// Potentials V: R^n -> R with exact gradients and Hessians.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Smooth potential with analytic derivatives. Arrays are raw so the
/// solver can evaluate node values without allocating.
class Potential {
public:
    virtual ~Potential() = default;

    virtual int dim() const = 0;
    virtual double value(const double* u) const = 0;
    virtual void gradient(const double* u, double* g) const = 0;
    /// Row-major n x n.
    virtual void hessian(const double* u, double* h) const = 0;

    const std::string& name() const { return name_; }
    const std::vector<double>& params() const { return params_; }
    /// Differentiability class; -1 means smooth.
    int regularity() const { return regularity_; }

    double value(const Vec& u) const { return value(u.data()); }
    Vec gradient(const Vec& u) const {
        Vec g(dim());
        gradient(u.data(), g.data());
        return g;
    }
    Mat hessian(const Vec& u) const {
        Mat h(dim(), dim());
        std::vector<double> buf(dim() * dim());
        hessian(u.data(), buf.data());
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < dim(); ++j) h(i, j) = buf[i * dim() + j];
        return h;
    }

protected:
    std::string name_;
    std::vector<double> params_;
    int regularity_ = -1;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// Scalar polynomial V(u) = sum_k a_k u^k.
class PolynomialPotential : public Potential {
public:
    PolynomialPotential(std::string name, std::vector<double> params, std::vector<double> coeffs)
        : a_(std::move(coeffs)) {
        name_ = std::move(name);
        params_ = std::move(params);
        for (std::size_t k = 1; k < a_.size(); ++k) da_.push_back(k * a_[k]);
        for (std::size_t k = 1; k < da_.size(); ++k) dda_.push_back(k * da_[k]);
    }

    int dim() const override { return 1; }
    double value(const double* u) const override { return horner(a_, *u); }
    void gradient(const double* u, double* g) const override { *g = horner(da_, *u); }
    void hessian(const double* u, double* h) const override { *h = horner(dda_, *u); }

    const std::vector<double>& coefficients() const { return a_; }

private:
    static double horner(const std::vector<double>& c, double x) {
        double r = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
        return r;
    }
    std::vector<double> a_, da_, dda_;
};

/// Two double wells coupled by gamma/2 |u1 - u2|^2.
class CoupledDoubleWell : public Potential {
public:
    explicit CoupledDoubleWell(double gamma) : gamma_(gamma) {
        name_ = "coupled_dw";
        params_ = {gamma};
    }
    int dim() const override { return 2; }
    double value(const double* u) const override {
        const double a = 1.0 - u[0] * u[0], b = 1.0 - u[1] * u[1], d = u[0] - u[1];
        return 0.25 * (a * a + b * b) + 0.5 * gamma_ * d * d;
    }
    void gradient(const double* u, double* g) const override {
        const double d = u[0] - u[1];
        g[0] = u[0] * u[0] * u[0] - u[0] + gamma_ * d;
        g[1] = u[1] * u[1] * u[1] - u[1] - gamma_ * d;
    }
    void hessian(const double* u, double* h) const override {
        h[0] = 3.0 * u[0] * u[0] - 1.0 + gamma_;
        h[1] = h[2] = -gamma_;
        h[3] = 3.0 * u[1] * u[1] - 1.0 + gamma_;
    }

private:
    double gamma_;
};

/// (1 - u^2)^2 / 4.
inline PotentialPtr double_well() {
    return std::make_shared<PolynomialPotential>("dw", std::vector<double>{},
                                                 std::vector<double>{0.25, 0.0, -0.5, 0.0, 0.25});
}

/// Gradient -u(1-u)(u-a), normalized so V(0) = 0.
inline PotentialPtr cubic_bistable(double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("cb: parameter a must lie in (0,1)");
    return std::make_shared<PolynomialPotential>(
        "cb", std::vector<double>{a},
        std::vector<double>{0.0, 0.0, a / 2.0, -(1.0 + a) / 3.0, 0.25});
}

/// Degree-6 triple well with minima at -1, 0, +1 and levels
/// V(+1) = d1, V(0) = 0, V(-1) = -d2. Gradient u(u^2-1)(3u^2 + alpha u + beta - 1).
inline PotentialPtr triple_well(double d1, double d2) {
    const double alpha = -15.0 * (d1 + d2) / 4.0;
    const double beta = -2.0 * (d1 - d2);
    // Keep the three wells and the two barriers: the quadratic factor needs
    // one root in (-1,0) and one in (0,1).
    const auto q = [&](double x) { return 3.0 * x * x + alpha * x + beta - 1.0; };
    if (!(q(-1.0) > 0.0 && q(0.0) < 0.0 && q(1.0) > 0.0))
        throw std::invalid_argument("tw: depth offsets too large, wells are lost");
    // u^2(1-u^2)^2/2 plus the tilt alpha u^5/5 + beta u^4/4 - alpha u^3/3 - beta u^2/2
    std::vector<double> c(7, 0.0);
    c[2] = 0.5 - beta / 2.0;
    c[3] = -alpha / 3.0;
    c[4] = -1.0 + beta / 4.0;
    c[5] = alpha / 5.0;
    c[6] = 0.5;
    return std::make_shared<PolynomialPotential>("tw", std::vector<double>{d1, d2}, std::move(c));
}

/// k u^2 / 2.
inline PotentialPtr quadratic(double k) {
    return std::make_shared<PolynomialPotential>("quadratic", std::vector<double>{k},
                                                 std::vector<double>{0.0, 0.0, k / 2.0});
}

/// Builtin lookup by configuration name. Missing parameters take defaults.
inline PotentialPtr make_potential(const std::string& name, const std::vector<double>& p) {
    auto arg = [&](std::size_t i, double def) { return i < p.size() ? p[i] : def; };
    if (name == "dw") return double_well();
    if (name == "cb") return cubic_bistable(arg(0, 0.25));
    if (name == "tw") return triple_well(arg(0, 0.06), arg(1, 0.02));
    if (name == "quadratic") return quadratic(arg(0, 1.0));
    if (name == "coupled_dw") return std::make_shared<CoupledDoubleWell>(arg(0, 0.1));
    throw std::invalid_argument("unknown potential '" + name + "'");
}

struct PotentialEval {
    double value;
    Vec gradient;
    Mat hessian;
};

/// Value, gradient and Hessian at u. Throws on non-finite output.
inline PotentialEval eval_potential(const Potential& V, const Vec& u) {
    if (u.size() != V.dim()) throw std::invalid_argument("eval_potential: dimension mismatch");
    if (!u.allFinite()) throw std::invalid_argument("eval_potential: non-finite argument");
    PotentialEval e{V.value(u), V.gradient(u), V.hessian(u)};
    if (!std::isfinite(e.value) || !e.gradient.allFinite() || !e.hessian.allFinite())
        throw std::runtime_error("potential '" + V.name() + "' produced a non-finite value");
    return e;
}

}  // namespace rdlab
