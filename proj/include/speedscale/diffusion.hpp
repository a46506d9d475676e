#pragma once

#include <cmath>
#include <stdexcept>

#include "speedscale/fluid.hpp"
#include "speedscale/minimize.hpp"

namespace speedscale {

/**
 * Diffusion-model basis function
 *   h(x) = K*(x) - eta sqrt(2x + q^2) + eta q,
 * the perturbation of the fluid value function suggested by the reflected
 * diffusion.  The constant makes h(0) = 0.  Since grad K*(0) = 2 alpha, the
 * reflection condition grad h(0) = 0 holds at q = eta / (2 alpha); the
 * reference experiments instead fix q = eta / alpha, which leaves
 * grad h(0) = alpha >= 0 and keeps the function nondecreasing.
 */
struct DiffusionBasis {
    double eta;
    double q;
    double alpha;

    static DiffusionBasis with_boundary_condition(double eta, double alpha) {
        return DiffusionBasis{eta, eta / (2.0 * alpha), alpha};
    }

    double value(double x) const {
        check(x);
        return k_star(x, alpha) - eta * std::sqrt(2.0 * x + q * q) + eta * q;
    }
    double grad(double x) const {
        check(x);
        return grad_k_star(x, alpha) - eta / std::sqrt(2.0 * x + q * q);
    }
    double hess(double x) const {
        check(x);
        return hess_k_star(x, alpha) + eta * std::pow(2.0 * x + q * q, -1.5);
    }
    double operator()(double x) const { return value(x); }

private:
    void check(double x) const {
        if (x < 0.0) throw std::domain_error("DiffusionBasis: x must be nonnegative");
        if (!(q > 0.0) || eta < 0.0) throw std::invalid_argument("DiffusionBasis: need q > 0, eta >= 0");
    }
};

/**
 * Generator of the diffusion model applied to a C^2 function:
 *   D^D_u h (x) = (-u + alpha) grad h(x) + (sigma^2 / 2) hess h(x).
 */
inline double diffusion_generator_apply(double grad_h, double hess_h, double u, double alpha,
                                        double sigma2) {
    return (-u + alpha) * grad_h + 0.5 * sigma2 * hess_h;
}

template <class H>
double diffusion_generator_apply(const H& h, double x, double u, double alpha, double sigma2) {
    return diffusion_generator_apply(h.grad(x), h.hess(x), u, alpha, sigma2);
}

/**
 * Bellman error of the diffusion model for the quadratic cost x + u^2/2,
 * using the interior minimizer u* = grad h(x):
 *   E(x) = x - (grad h)^2/2 + alpha grad h + (sigma^2/2) hess h.
 * Requires grad h(x) >= 0 so the minimizer is feasible.
 */
template <class H>
double diffusion_bellman_error(const H& h, double x, double alpha, double sigma2) {
    const double g = h.grad(x);
    if (g < 0.0) throw std::domain_error("diffusion_bellman_error: grad h must be nonnegative");
    return x - 0.5 * g * g + alpha * g + 0.5 * sigma2 * h.hess(x);
}

/// Same quantity by direct numeric minimization over u >= 0 (oracle route).
template <class H>
double diffusion_bellman_error_numeric(const H& h, double x, double alpha, double sigma2,
                                       double u_hi) {
    auto objective = [&](double u) {
        return x + 0.5 * u * u + diffusion_generator_apply(h, x, u, alpha, sigma2);
    };
    return golden_min(objective, 0.0, u_hi).second;
}

}  // namespace speedscale
