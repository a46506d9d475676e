#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "speedscale/rng.hpp"

namespace speedscale {

/// Truncated, renormalized probability mass function on a nonnegative lattice.
struct Pmf {
    std::vector<double> value;
    std::vector<double> prob;
    double lattice_unit = 0.0;  ///< every value is an integer multiple of this step
    double mean = 0.0;          ///< moments of the truncated pmf
    double variance = 0.0;

    std::size_t size() const { return value.size(); }
    double max_value() const { return value.empty() ? 0.0 : value.back(); }
};

/**
 * Marginal distribution of the i.i.d. job arrivals A(t).
 *
 * Two variants:
 *  - ScaledGeometric: A = delta * G with G geometric on {0,1,...},
 *    P{G = k} = (1-p) p^k.
 *  - CoinMixture: A = (1-B) A0 + B * delta_z * Z with B ~ Bernoulli(rho_mix),
 *    Z ~ Bernoulli(rho_z), delta_z = 1/rho_z, and A0 a ScaledGeometric base.
 *
 * Instances are immutable; sampling takes an explicit stream argument.
 */
class ArrivalSpec {
public:
    static ArrivalSpec scaled_geometric(double p_success, double delta) {
        if (!(p_success > 0.0 && p_success < 1.0))
            throw std::invalid_argument("scaled_geometric: p must lie in (0,1)");
        if (!(delta > 0.0))
            throw std::invalid_argument("scaled_geometric: delta must be positive");
        ArrivalSpec s;
        s.p_ = p_success;
        s.delta_ = delta;
        return s;
    }

    static ArrivalSpec coin_mixture(double rho_mix, const ArrivalSpec& base, double rho_z) {
        if (base.mixture_)
            throw std::invalid_argument("coin_mixture: base must be a scaled geometric");
        if (!(rho_mix >= 0.0 && rho_mix <= 1.0))
            throw std::invalid_argument("coin_mixture: rho_mix must lie in [0,1]");
        if (!(rho_z > 0.0 && rho_z <= 1.0))
            throw std::invalid_argument("coin_mixture: rho_z must lie in (0,1]");
        ArrivalSpec s = base;
        s.mixture_ = true;
        s.rho_mix_ = rho_mix;
        s.rho_z_ = rho_z;
        return s;
    }

    /**
     * Mixture whose design variance equals `kappa`, using the fixed construction
     * rho_mix = 0.9 and rho_z = 9 / (10 kappa + 8) over the unit-mean base
     * (p = 0.96, delta = 1/24).  Requires kappa >= 1; the construction cannot
     * reach below the base variance.
     */
    static ArrivalSpec mixture_for_variance(double kappa) {
        if (!(kappa >= 1.0))
            throw std::invalid_argument("mixture_for_variance: kappa must be >= 1");
        const double rho_z = 9.0 / (10.0 * kappa + 8.0);
        return coin_mixture(0.9, default_base(), rho_z);
    }

    static ArrivalSpec default_base() { return scaled_geometric(0.96, 1.0 / 24.0); }

    bool is_mixture() const { return mixture_; }
    double p_success() const { return p_; }
    double delta() const { return delta_; }
    double rho_mix() const { return rho_mix_; }
    double rho_z() const { return rho_z_; }
    double delta_z() const { return 1.0 / rho_z_; }

    /// Exact mean of the untruncated distribution.
    double alpha() const {
        const double a0 = delta_ * p_ / (1.0 - p_);
        if (!mixture_) return a0;
        return (1.0 - rho_mix_) * a0 + rho_mix_;  // rho_z * delta_z = 1
    }

    /// Exact variance of the untruncated distribution.
    double sigma2() const {
        const double v0 = delta_ * delta_ * p_ / ((1.0 - p_) * (1.0 - p_));
        if (!mixture_) return v0;
        const double a0 = delta_ * p_ / (1.0 - p_);
        const double ea2 = (1.0 - rho_mix_) * (v0 + a0 * a0) + rho_mix_ * delta_z();
        const double a = alpha();
        return ea2 - a * a;
    }

    /**
     * Design variance of the mixture: the value of the identity
     * (1-rho) sigma0^2 + rho (1-rho_z)/rho_z with the base variance taken as
     * its nominal value 1.  Equals `kappa` for mixture_for_variance(kappa).
     * The exact base variance is 25/24, so sigma2() exceeds this by
     * (1-rho_mix) * (25/24 - 1).
     */
    double nominal_sigma2() const {
        if (!mixture_) return 1.0;
        return (1.0 - rho_mix_) + rho_mix_ * (1.0 - rho_z_) / rho_z_;
    }

    double p_zero() const {
        const double pz0 = 1.0 - p_;
        if (!mixture_) return pz0;
        return (1.0 - rho_mix_) * pz0 + rho_mix_ * (1.0 - rho_z_);
    }

    /// Finest lattice step carrying every support value (base step and delta_z).
    double lattice_unit() const {
        if (!mixture_) return delta_;
        // find a small q with delta_z an integer multiple of delta/q
        for (int q = 1; q <= 96; ++q) {
            const double ratio = delta_z() * q / delta_;
            if (std::abs(ratio - std::llround(ratio)) <= 1e-9 * std::max(1.0, ratio))
                return delta_ / q;
        }
        return 0.0;  // no common lattice
    }

    /**
     * Truncated pmf.  The dropped tail has mass < tail_eps and is folded into
     * renormalization.  The support is extended beyond the requested bound
     * until the dropped tail can no longer perturb the first two moments at
     * the 1e-12 level, so the reported moments track the analytic alpha and
     * sigma2 to well within 1e-9 for any tail_eps <= 1e-6.
     */
    Pmf pmf(double tail_eps = 1e-10) const {
        if (!(tail_eps > 0.0 && tail_eps <= 1e-6))
            throw std::invalid_argument("pmf: tail_eps must lie in (0, 1e-6]");
        const double unit = lattice_unit();
        if (unit <= 0.0) throw std::invalid_argument("pmf: support has no common lattice");

        // geometric part, weight (1 - rho_mix) for mixtures
        const double geo_w = mixture_ ? (1.0 - rho_mix_) : 1.0;
        const double geo_tail = geo_w > 0.0 ? tail_eps / geo_w : 1e-12;

        std::map<long long, double> mass;
        if (geo_w > 0.0) {
            const long long K = geometric_cutoff(geo_tail);
            const double renorm = 1.0 - std::pow(p_, static_cast<double>(K + 1));
            const double q = 1.0 - p_;
            double pk = q;
            for (long long k = 0; k <= K; ++k) {
                const double v = static_cast<double>(k) * delta_;
                mass[std::llround(v / unit)] += geo_w * pk / renorm;
                pk *= p_;
            }
        }
        if (mixture_) {
            mass[0] += rho_mix_ * (1.0 - rho_z_);
            mass[std::llround(delta_z() / unit)] += rho_mix_ * rho_z_;
        }

        Pmf out;
        out.lattice_unit = unit;
        double total = 0.0;
        for (const auto& [idx, pr] : mass) total += pr;
        out.value.reserve(mass.size());
        out.prob.reserve(mass.size());
        for (const auto& [idx, pr] : mass) {
            out.value.push_back(static_cast<double>(idx) * unit);
            out.prob.push_back(pr / total);
        }
        double m = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < out.value.size(); ++i) {
            m += out.value[i] * out.prob[i];
            m2 += out.value[i] * out.value[i] * out.prob[i];
        }
        out.mean = m;
        out.variance = m2 - m * m;
        return out;
    }

    /// One draw.  Mixtures always consume exactly three uniforms.
    double sample(RngStream& stream) const {
        if (!mixture_) return delta_ * sample_geometric(stream.uniform01());
        const double ub = stream.uniform01();
        const double ua = stream.uniform01();
        const double uz = stream.uniform01();
        if (ub < rho_mix_) return uz < rho_z_ ? delta_z() : 0.0;
        return delta_ * sample_geometric(ua);
    }

    double sample_geometric(double u) const {
        // P{G >= k} = p^k
        return std::floor(std::log(1.0 - u) / std::log(p_));
    }

private:
    ArrivalSpec() = default;

    long long geometric_cutoff(double tail_eps) const {
        // smallest K with p^(K+1) <= tail_eps, extended until the dropped tail
        // is harmless for mean and variance
        const double lp = std::log(p_);
        long long K = static_cast<long long>(std::ceil(std::log(tail_eps) / lp)) - 1;
        if (K < 0) K = 0;
        const double a0 = delta_ * p_ / (1.0 - p_);
        while (true) {
            const double tail = std::pow(p_, static_cast<double>(K + 1));
            const double reach = (static_cast<double>(K) + 1.0) * delta_ + a0;
            if (tail * (1.0 + reach * reach) <= 1e-12) break;
            K += std::max<long long>(8, K / 8);
        }
        return K;
    }

    double p_ = 0.0;
    double delta_ = 0.0;
    bool mixture_ = false;
    double rho_mix_ = 0.0;
    double rho_z_ = 1.0;
};

}  // namespace speedscale
