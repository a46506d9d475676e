#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace speedscale {

/**
 * One-step cost c(x, u) = x + nu * P(u), balancing delay against power.
 *
 * Power families: quadratic P(u) = u^2, polynomial P(u) = u^rho with rho > 1,
 * exponential P(u) = exp(kappa u).  The fluid-modified variants replace P so
 * that the cost vanishes at the equilibrium (x = 0, u = alpha):
 * ([u - alpha]_+)^rho for the polynomial family and
 * [exp(kappa u) - exp(kappa alpha)]_+ for the exponential one.
 */
class CostModel {
public:
    enum class Family { quadratic, polynomial, exponential };

    static CostModel quadratic(double nu) { return CostModel(Family::quadratic, nu, 2.0, 0.0); }

    static CostModel polynomial(double rho, double nu) {
        if (!(rho > 1.0)) throw std::invalid_argument("CostModel: rho must exceed 1");
        return CostModel(Family::polynomial, nu, rho, 0.0);
    }

    static CostModel exponential(double kappa, double nu) {
        if (!(kappa > 0.0)) throw std::invalid_argument("CostModel: kappa must be positive");
        return CostModel(Family::exponential, nu, 2.0, kappa);
    }

    /// Fluid-modified variant of this model, anchored at the arrival rate alpha.
    CostModel fluid_modified(double alpha) const {
        if (!(alpha >= 0.0)) throw std::invalid_argument("CostModel: alpha must be nonnegative");
        CostModel m = *this;
        m.fluid_modified_ = true;
        m.alpha_ = alpha;
        return m;
    }

    double operator()(double x, double u) const {
        if (x < 0.0) throw std::domain_error("cost: x must be nonnegative");
        return x + power_cost(u);
    }

    /// The u-only part of the cost, nu * P(u).
    double power_cost(double u) const {
        if (u < 0.0) throw std::domain_error("cost: u must be nonnegative");
        switch (family_) {
            case Family::quadratic: {
                const double w = fluid_modified_ ? std::max(0.0, u - alpha_) : u;
                return nu_ * w * w;
            }
            case Family::polynomial: {
                const double w = fluid_modified_ ? std::max(0.0, u - alpha_) : u;
                return nu_ * std::pow(w, rho_);
            }
            case Family::exponential: {
                if (!fluid_modified_) return nu_ * std::exp(kappa_ * u);
                return nu_ * std::max(0.0, std::exp(kappa_ * u) - std::exp(kappa_ * alpha_));
            }
        }
        return 0.0;
    }

    /// All supported families are convex in u (used to enable refinement passes).
    bool convex_in_u() const { return true; }

    Family family() const { return family_; }
    bool is_fluid_modified() const { return fluid_modified_; }
    double nu() const { return nu_; }
    double rho() const { return rho_; }
    double kappa() const { return kappa_; }
    double alpha() const { return alpha_; }

    std::string name() const {
        std::string n;
        switch (family_) {
            case Family::quadratic: n = "quadratic"; break;
            case Family::polynomial: n = "polynomial"; break;
            case Family::exponential: n = "exponential"; break;
        }
        if (fluid_modified_) n += "-fluid-modified";
        return n;
    }

private:
    CostModel(Family f, double nu, double rho, double kappa)
        : family_(f), nu_(nu), rho_(rho), kappa_(kappa) {
        if (!(nu > 0.0)) throw std::invalid_argument("CostModel: nu must be positive");
    }

    Family family_;
    double nu_;
    double rho_;
    double kappa_;
    double alpha_ = 0.0;
    bool fluid_modified_ = false;
};

}  // namespace speedscale
