#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "speedscale/arrivals.hpp"
#include "speedscale/rng.hpp"

namespace speedscale {

/**
 * Common-random-number construction for the variance study: one shared scaled
 * geometric draw A0(t), one shared mixing coin B(t), and a monotone family of
 * coupled Bernoulli variables Z_1(t) <= Z_2(t) <= ... built by the recursion
 *   Z_1 = B_1,   Z_{i+1} = Z_i + (1 - Z_i) B_{i+1},
 * with independent B_i ~ Bernoulli(rho_i).  The recursion runs over variance
 * levels in descending kappa order, because the marginal P{Z = 1} = rho_Z(kappa)
 * decreases in kappa; this is the unique ordering keeping every rho_i in [0,1].
 * Level arrivals are assembled as A = (1-B) A0 + B delta_Z Z.
 */
class CoupledArrivalLevels {
public:
    explicit CoupledArrivalLevels(std::vector<double> kappas,
                                  ArrivalSpec base = ArrivalSpec::default_base(),
                                  double rho_mix = 0.9)
        : kappas_(std::move(kappas)), base_(base), rho_mix_(rho_mix) {
        if (kappas_.empty()) throw std::invalid_argument("coupled levels: no variance levels");
        for (std::size_t i = 0; i < kappas_.size(); ++i) {
            if (!(kappas_[i] >= 1.0))
                throw std::invalid_argument("coupled levels: every kappa must be >= 1");
            if (i > 0 && !(kappas_[i] > kappas_[i - 1]))
                throw std::invalid_argument("coupled levels: kappas must be strictly increasing");
        }
        const std::size_t L = kappas_.size();
        specs_.reserve(L);
        for (double k : kappas_) specs_.push_back(ArrivalSpec::mixture_for_variance(k));
        // recursion parameters over descending kappa (ascending marginals)
        rho_i_.resize(L);
        double prev_marginal = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            const double m = specs_[L - 1 - i].rho_z();  // marginal for this recursion slot
            const double r = (m - prev_marginal) / (1.0 - prev_marginal);
            if (!(r >= 0.0 && r <= 1.0))
                throw std::invalid_argument("coupled levels: recursion parameter outside [0,1]");
            rho_i_[i] = r;
            prev_marginal = m;
        }
    }

    std::size_t levels() const { return kappas_.size(); }
    const ArrivalSpec& spec(std::size_t level) const { return specs_[level]; }
    const std::vector<double>& kappas() const { return kappas_; }
    const std::vector<double>& recursion_parameters() const { return rho_i_; }

    struct Draw {
        double a0 = 0.0;
        int b = 0;
        std::vector<int> z;        ///< in recursion order (descending kappa)
        std::vector<double> a;     ///< per input level (ascending kappa)
    };

    /// One coupled time step.  Always consumes levels() + 2 uniforms.
    Draw draw(RngStream& stream) const {
        const std::size_t L = kappas_.size();
        Draw d;
        d.a0 = base_.delta() * base_.sample_geometric(stream.uniform01());
        d.b = stream.uniform01() < rho_mix_ ? 1 : 0;
        d.z.resize(L);
        int z = 0;
        for (std::size_t i = 0; i < L; ++i) {
            const int bi = stream.uniform01() < rho_i_[i] ? 1 : 0;
            z = z + (1 - z) * bi;
            d.z[i] = z;
        }
        d.a.resize(L);
        for (std::size_t level = 0; level < L; ++level) {
            const int z_level = d.z[L - 1 - level];  // map ascending kappa to recursion slot
            d.a[level] =
                d.b ? specs_[level].delta_z() * static_cast<double>(z_level) : d.a0;
        }
        return d;
    }

    /// Arrival for a single level.  Consumes the full shared tuple (the same
    /// levels() + 2 uniforms as draw()) without allocating, so distinct levels
    /// replaying the same stream stay coupled pathwise.
    double draw_level(std::size_t level, RngStream& stream) const {
        const std::size_t L = kappas_.size();
        const std::size_t slot = L - 1 - level;
        const double a0 = base_.delta() * base_.sample_geometric(stream.uniform01());
        const int b = stream.uniform01() < rho_mix_ ? 1 : 0;
        int z = 0, z_slot = 0;
        for (std::size_t i = 0; i < L; ++i) {
            const int bi = stream.uniform01() < rho_i_[i] ? 1 : 0;
            z = z + (1 - z) * bi;
            if (i == slot) z_slot = z;
        }
        return b ? specs_[level].delta_z() * static_cast<double>(z_slot) : a0;
    }

private:
    std::vector<double> kappas_;
    ArrivalSpec base_;
    double rho_mix_;
    std::vector<ArrivalSpec> specs_;
    std::vector<double> rho_i_;
};

}  // namespace speedscale
