#pragma once

#include <cmath>
#include <utility>

namespace speedscale {

/**
 * Golden-section search for the minimum of a unimodal function on [lo, hi].
 * Returns (argmin, min value).
 */
template <class F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, int iters = 120) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

}  // namespace speedscale
