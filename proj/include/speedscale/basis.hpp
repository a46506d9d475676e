#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "speedscale/fluid.hpp"

namespace speedscale {

/**
 * Linear function class h^theta = sum_i theta_i psi_i.  Every basis function
 * must vanish at the origin, matching the normalization of the relative value
 * function.
 */
class LinearBasis {
public:
    struct Entry {
        std::string name;
        std::function<double(double)> f;
    };

    explicit LinearBasis(std::vector<Entry> entries) : entries_(std::move(entries)) {
        for (const auto& e : entries_)
            if (std::abs(e.f(0.0)) > 1e-12)
                throw std::invalid_argument("LinearBasis: basis functions must vanish at 0");
    }

    /// Fluid/diffusion pair: psi1 = K*, psi2 = q - sqrt(2x + q^2).
    static LinearBasis fluid_diffusion(double eta, double q, double alpha) {
        (void)eta;  // eta fixes q = eta/alpha at the call site; kept for the record
        std::vector<Entry> e;
        e.push_back({"kstar", [alpha](double x) { return k_star(x, alpha); }});
        e.push_back({"diffusion_correction",
                     [q](double x) { return q - std::sqrt(2.0 * x + q * q); }});
        return LinearBasis(std::move(e));
    }

    /// Generic comparison pair: psi1 = x, psi2 = x^2.
    static LinearBasis polynomial() {
        std::vector<Entry> e;
        e.push_back({"x", [](double x) { return x; }});
        e.push_back({"x2", [](double x) { return x * x; }});
        return LinearBasis(std::move(e));
    }

    std::size_t dim() const { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_[i]; }

    void eval(double x, std::vector<double>& out) const {
        out.resize(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) out[i] = entries_[i].f(x);
    }

    /// h^theta as a standalone callable (captures copies).
    std::function<double(double)> combine(std::vector<double> theta) const {
        if (theta.size() != entries_.size())
            throw std::invalid_argument("LinearBasis: theta dimension mismatch");
        auto entries = entries_;
        return [entries, theta](double x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < entries.size(); ++i) acc += theta[i] * entries[i].f(x);
            return acc;
        };
    }

private:
    std::vector<Entry> entries_;
};

}  // namespace speedscale
