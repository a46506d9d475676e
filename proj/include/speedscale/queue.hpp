#pragma once

#include <stdexcept>

#include "speedscale/arrivals.hpp"

namespace speedscale {

/**
 * One transition of the controlled random walk X(t+1) = X(t) - U(t) + A(t+1).
 * The feasible action set is U(x) = [0, x], so the state stays nonnegative.
 */
inline double step(double x, double u, double a) {
    if (u < 0.0 || u > x + 1e-12 * std::max(1.0, x))
        throw std::domain_error("step: action must lie in [0, x]");
    if (a < 0.0) throw std::domain_error("step: arrival must be nonnegative");
    const double drained = std::max(0.0, x - u);
    return drained + a;
}

/**
 * Discrete-time generator applied to a function of the state:
 * D_u h (x) = sum_a pmf(a) h(x - u + a) - h(x).
 */
template <class H>
double generator_apply(H&& h, double x, double u, const Pmf& pmf) {
    if (u < 0.0 || u > x + 1e-12 * std::max(1.0, x))
        throw std::domain_error("generator_apply: action must lie in [0, x]");
    const double y = std::max(0.0, x - u);
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) acc += pmf.prob[i] * h(y + pmf.value[i]);
    return acc - h(x);
}

}  // namespace speedscale
