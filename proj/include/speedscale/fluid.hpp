#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace speedscale {

/**
 * Fluid value function for the unmodified quadratic cost x + u^2/2, obtained
 * from the draining problem stopped at the origin:
 *   K*(x) = alpha x + [(2x + alpha^2)^(3/2) - alpha^3] / 3.
 */
inline double k_star(double x, double alpha) {
    const double s = 2.0 * x + alpha * alpha;
    return alpha * x + (s * std::sqrt(s) - alpha * alpha * alpha) / 3.0;
}

inline double grad_k_star(double x, double alpha) {
    return alpha + std::sqrt(2.0 * x + alpha * alpha);
}

inline double hess_k_star(double x, double alpha) {
    return 1.0 / std::sqrt(2.0 * x + alpha * alpha);
}

/// K* packaged with its derivatives, for use as a smooth basis function.
struct KStar {
    double alpha;
    double value(double x) const { return k_star(x, alpha); }
    double grad(double x) const { return grad_k_star(x, alpha); }
    double hess(double x) const { return hess_k_star(x, alpha); }
    double operator()(double x) const { return value(x); }
};

/// Fluid value function for the modified quadratic cost: J*(x) = (2x)^(3/2) / 3.
inline double j_star_quad(double x) {
    const double s = 2.0 * x;
    return s * std::sqrt(s) / 3.0;
}

/// Optimal fluid policy for the modified quadratic cost: sqrt(2x) + alpha.
inline double phi_fluid_quad(double x, double alpha) {
    return std::sqrt(2.0 * x) + alpha;
}

/**
 * Fluid value function and optimal policy for the modified polynomial cost
 * x + nu ([u - alpha]_+)^rho, rho > 1:
 *   J*(x)   = nu x^((2 rho - 1)/rho) rho^2/(2 rho - 1) (1/(nu (rho-1)))^((rho-1)/rho)
 *   phi(x)  = (x / (nu (rho - 1)))^(1/rho) + alpha
 */
inline std::pair<double, double> fluid_poly(double x, double rho, double nu, double alpha) {
    if (!(rho > 1.0)) throw std::invalid_argument("fluid_poly: rho must exceed 1");
    if (!(nu > 0.0)) throw std::invalid_argument("fluid_poly: nu must be positive");
    if (x < 0.0) throw std::domain_error("fluid_poly: x must be nonnegative");
    const double value = nu * std::pow(x, (2.0 * rho - 1.0) / rho) * rho * rho / (2.0 * rho - 1.0) *
                         std::pow(1.0 / (nu * (rho - 1.0)), (rho - 1.0) / rho);
    const double policy = std::pow(x / (nu * (rho - 1.0)), 1.0 / rho) + alpha;
    return {value, policy};
}

/**
 * Principal branch of the Lambert W function on y >= 0.  Initial guess
 * log1p(y), refined by Halley iterations until the residual |w e^w - y| is
 * below 1e-12 (relative for large y).
 */
inline double lambert_w0(double y) {
    if (y < 0.0) throw std::domain_error("lambert_w0: argument must be nonnegative");
    if (y == 0.0) return 0.0;
    double w = std::log1p(y);
    if (w == 0.0) w = y;  // tiny arguments
    for (int it = 0; it < 64; ++it) {
        double f, fp, fpp;
        if (y > 1e10) {
            // iterate on w + log w = log y to avoid overflow in e^w
            f = w + std::log(w) - std::log(y);
            fp = 1.0 + 1.0 / w;
            fpp = -1.0 / (w * w);
        } else {
            const double ew = std::exp(w);
            f = w * ew - y;
            fp = ew * (w + 1.0);
            fpp = ew * (w + 2.0);
        }
        const double denom = fp - 0.5 * f * fpp / fp;
        const double dw = f / denom;
        w -= dw;
        if (std::abs(dw) <= 1e-16 * std::max(1.0, std::abs(w))) break;
    }
    return w;
}

/// Residual w e^w - y evaluated without overflow, relative for large y.
inline double lambert_residual(double w, double y) {
    if (y > 1e10) return (std::exp(w + std::log(w) - std::log(y)) - 1.0) * y;
    return w * std::exp(w) - y;
}

/**
 * Fluid machinery for the modified exponential cost
 * x + nu [e^(kappa u) - e^(kappa alpha)]_+.  Valid for x >= nu_tilde where
 * nu_tilde = nu e^(kappa alpha), the region in which the Lambert argument is
 * nonnegative.
 */
struct ExpFluid {
    double kappa;
    double nu;
    double alpha;

    double nu_tilde() const { return nu * std::exp(kappa * alpha); }

    /// Smallest anchor admitted by the value-function bounds.
    double x_base_min() const { return nu_tilde() * (std::exp(2.0) + 1.0); }

    double w_arg(double x) const {
        const double nt = nu_tilde();
        if (x < nt * (1.0 - 1e-12))
            throw std::domain_error("ExpFluid: x must be at least nu_tilde");
        return std::max(0.0, (x - nt) / (std::exp(1.0) * nt));
    }

    /// Optimal fluid policy phi(x) = (W((x - nu_tilde)/(e nu_tilde)) + 1)/kappa + alpha.
    double policy(double x) const { return (lambert_w0(w_arg(x)) + 1.0) / kappa + alpha; }

    /// Gradient of the fluid value function, kappa nu_tilde e^(W + 1).
    double grad_value(double x) const {
        return kappa * nu_tilde() * std::exp(lambert_w0(w_arg(x)) + 1.0);
    }

    /**
     * Value relative to x_base, by adaptive quadrature of the gradient.
     * Relative error at most 1e-8; throws on non-convergence.
     */
    double value_numeric(double x, double x_base) const {
        check_base(x, x_base);
        if (x == x_base) return 0.0;
        double err = 0.0;
        const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            [this](double s) { return grad_value(s); }, x_base, x, 12, 1e-10, &err);
        if (!(err <= 1e-8 * std::max(1.0, std::abs(val))))
            throw std::runtime_error("ExpFluid: quadrature did not converge");
        return val;
    }

    /**
     * Anchored envelopes around the value:
     *   lower(x) = C- + (kappa/2) xt^2 / (log xt - log nu - (kappa alpha + 1))
     *   upper(x) = C+ + (kappa/2) xt^2,      xt = x - nu_tilde,
     * with the constants fixed so both equal value_numeric(x_base) = 0 at x_base.
     */
    std::pair<double, double> value_bounds(double x, double x_base) const {
        check_base(x, x_base);
        return {lower_raw(x) - lower_raw(x_base), upper_raw(x) - upper_raw(x_base)};
    }

private:
    void check_base(double x, double x_base) const {
        if (x_base < x_base_min() * (1.0 - 1e-9))
            throw std::domain_error("ExpFluid: x_base must be at least nu_tilde (e^2 + 1)");
        if (x < x_base * (1.0 - 1e-12))
            throw std::domain_error("ExpFluid: x must be at least x_base");
    }
    double lower_raw(double x) const {
        const double xt = x - nu_tilde();
        return 0.5 * kappa * xt * xt / (std::log(xt) - std::log(nu) - (kappa * alpha + 1.0));
    }
    double upper_raw(double x) const {
        const double xt = x - nu_tilde();
        return 0.5 * kappa * xt * xt;
    }
};

}  // namespace speedscale
