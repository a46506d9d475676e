#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "speedscale/arrivals.hpp"
#include "speedscale/cost.hpp"
#include "speedscale/grid.hpp"
#include "speedscale/minimize.hpp"
#include "speedscale/policy.hpp"
#include "speedscale/queue.hpp"
#include "speedscale/rng.hpp"

namespace speedscale {

// ---------------------------------------------------------------------------
// Value iteration on the truncated lattice
// ---------------------------------------------------------------------------

struct ViaStop {
    int max_iters = 20000;
    double tol = 1e-6;
};

struct ViaResult {
    TabularFunction V;                ///< V_n
    TabularFunction h;                ///< V_n - V_n(0)
    double eta_hat = 0.0;             ///< V_{n+1}(0) - V_n(0) at termination
    double eta_hat_span = 0.0;        ///< span midpoint of V_{n+1} - V_n
    std::vector<double> error_trace;  ///< per-iteration sup norm of h_{n+1} - h_n
    int iterations = 0;
    bool converged = false;
};

/// Arrival pmf expressed as index offsets on a grid lattice.
struct LatticeArrivals {
    std::vector<long long> offset;
    std::vector<double> prob;
};

inline LatticeArrivals lattice_arrivals(const Pmf& pmf, double delta) {
    LatticeArrivals la;
    la.offset.reserve(pmf.size());
    la.prob.reserve(pmf.size());
    for (std::size_t j = 0; j < pmf.size(); ++j) {
        const double r = pmf.value[j] / delta;
        const long long off = std::llround(r);
        if (std::abs(r - static_cast<double>(off)) > 1e-9 * std::max(1.0, r))
            throw std::invalid_argument("lattice_arrivals: arrival support is not on the grid lattice");
        la.offset.push_back(off);
        la.prob.push_back(pmf.prob[j]);
    }
    return la;
}

/**
 * Successive approximation for the average-cost optimality equation:
 *   V_{n+1}(x) = min_{u in {0, delta, ..., x}} ( c(x,u) + sum_a pmf(a) V_n(clamp(x-u+a)) ),
 * with transitions clamped at x_max (reflecting truncation).  Stops when the
 * sup norm of successive relative value functions h_n = V_n - V_n(0) falls
 * below tol, or after max_iters sweeps.  Throws if the error trace grows ten
 * times above its initial value.
 */
inline ViaResult value_iteration(const CostModel& model, const Pmf& arrivals, const StateGrid& grid,
                                 const TabularFunction& V0, ViaStop stop = {}) {
    const std::size_t n = grid.size();
    if (V0.grid().size() != n) throw std::invalid_argument("value_iteration: V0 grid mismatch");
    const LatticeArrivals la = lattice_arrivals(arrivals, grid.delta());

    std::vector<double> pcost(n);
    for (std::size_t k = 0; k < n; ++k) pcost[k] = model.power_cost(grid.value(k));

    std::vector<double> V = V0.values(), Vnext(n), W(n);
    ViaResult res{TabularFunction::zeros(grid), TabularFunction::zeros(grid)};
    res.error_trace.reserve(stop.max_iters);

    for (int iter = 1; iter <= stop.max_iters; ++iter) {
        // arrival expectation W(y) = E[ V(clamp(y + A)) ]
        for (std::size_t y = 0; y < n; ++y) {
            double acc = 0.0;
            for (std::size_t j = 0; j < la.offset.size(); ++j)
                acc += la.prob[j] * V[grid.clamp_index(static_cast<long long>(y) + la.offset[j])];
            W[y] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k <= i; ++k) {
                const double cand = pcost[k] + W[i - k];
                if (cand < best) best = cand;
            }
            Vnext[i] = grid.value(i) + best;
        }

        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = Vnext[i] - V[i];
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
        const double d0 = Vnext[0] - V[0];
        const double sup_h_diff = std::max(dmax - d0, d0 - dmin);
        res.error_trace.push_back(sup_h_diff);
        res.eta_hat = d0;
        res.eta_hat_span = 0.5 * (dmax + dmin);
        V.swap(Vnext);
        res.iterations = iter;

        if (sup_h_diff > 10.0 * res.error_trace.front() && sup_h_diff > 10.0 * stop.tol)
            throw std::runtime_error("value_iteration: error trace diverged");
        if (sup_h_diff < stop.tol) {
            res.converged = true;
            break;
        }
    }

    res.V = TabularFunction(grid, std::move(V));
    res.h = res.V.normalized();
    return res;
}

// ---------------------------------------------------------------------------
// Myopic policies and Bellman error
// ---------------------------------------------------------------------------

/**
 * Lattice scan machinery for the (c,h)-myopic problem with a function h given
 * in closed form (or any callable defined on the whole lattice).  Caches the
 * arrival expectation E[h(y + A)] on the lattice of pmf.lattice_unit, plus the
 * per-state argmin.  One instance serves one (h, cost, pmf) triple and is not
 * meant to be shared across threads.
 */
template <class H>
class MyopicEvaluator {
public:
    MyopicEvaluator(H h, CostModel model, Pmf pmf, double action_delta)
        : h_(std::move(h)), model_(std::move(model)), pmf_(std::move(pmf)),
          unit_(pmf_.lattice_unit), action_delta_(action_delta) {
        if (!(unit_ > 0.0)) throw std::invalid_argument("MyopicEvaluator: pmf has no lattice");
        const double r = action_delta_ / unit_;
        ustep_ = std::llround(r);
        if (ustep_ < 1 || std::abs(r - static_cast<double>(ustep_)) > 1e-9)
            throw std::invalid_argument("MyopicEvaluator: action lattice must refine the state lattice");
    }

    /// Lattice state index of x on the pmf lattice unit.
    long long state_index(double x) const {
        const long long i = std::llround(x / unit_);
        if (i < 0 || std::abs(x - static_cast<double>(i) * unit_) > 1e-6 * std::max(1.0, x))
            throw std::domain_error("MyopicEvaluator: state is off the lattice");
        return i;
    }

    /// Greedy lattice action at x (ties to the smallest u), memoized.
    double action(double x) {
        const long long i = state_index(x);
        auto it = action_memo_.find(i);
        if (it != action_memo_.end()) return it->second;
        const double u = scan(i).first;
        action_memo_.emplace(i, u);
        return u;
    }

    /**
     * Bellman error min_u (c(x,u) + D_u h(x)) over the lattice actions,
     * optionally refined by one golden-section pass over the continuous
     * interval around the lattice argmin (cost families convex in u only).
     */
    double bellman_error(double x, bool refine) {
        const long long i = state_index(x);
        auto [u_lat, best] = scan(i);
        if (refine && model_.convex_in_u()) {
            const double x_val = static_cast<double>(i) * unit_;
            const double lo = std::max(0.0, u_lat - action_delta_);
            const double hi = std::min(x_val, u_lat + action_delta_);
            if (hi > lo) {
                auto obj = [&](double u) {
                    return model_(x_val, u) + generator_apply(h_, x_val, u, pmf_);
                };
                best = std::min(best, golden_min(obj, lo, hi).second);
            }
        }
        return best;
    }

    double bellman_error_memo(double x) {
        const long long i = state_index(x);
        auto it = eb_memo_.find(i);
        if (it != eb_memo_.end()) return it->second;
        const double e = scan(i).second;
        eb_memo_.emplace(i, e);
        return e;
    }

    const Pmf& pmf() const { return pmf_; }
    double unit() const { return unit_; }

private:
    // (argmin u, min objective) of c(x,u) + D_u h(x) over lattice actions at state index i
    std::pair<double, double> scan(long long i) {
        const double x = static_cast<double>(i) * unit_;
        const double hx = h_(x);
        const long long kmax = i / ustep_;
        double best = std::numeric_limits<double>::infinity();
        long long karg = 0;
        auto obj = [&](long long k) {
            return model_.power_cost(static_cast<double>(k) * action_delta_) +
                   expectation(i - k * ustep_);
        };
        if (kmax <= 4096) {
            for (long long k = 0; k <= kmax; ++k) {
                const double v = obj(k);
                if (v < best) {
                    best = v;
                    karg = k;
                }
            }
        } else {
            // ternary search; requires the objective to be unimodal in u, which
            // holds for the convex cost families with convex h
            long long lo = 0, hi = kmax;
            while (hi - lo > 2) {
                const long long m1 = lo + (hi - lo) / 3;
                const long long m2 = hi - (hi - lo) / 3;
                if (obj(m1) <= obj(m2))
                    hi = m2;
                else
                    lo = m1;
            }
            for (long long k = lo; k <= hi; ++k) {
                const double v = obj(k);
                if (v < best) {
                    best = v;
                    karg = k;
                }
            }
        }
        double u_best = static_cast<double>(karg) * action_delta_;
        // the full-drain action u = x when x is not on the action lattice
        if (i % ustep_ != 0) {
            const double v = model_.power_cost(x) + expectation(0);
            if (v < best) {
                best = v;
                u_best = x;
            }
        }
        return {u_best, x + best - hx};
    }

    // E[h(y + A)] at lattice index i, cached; direct sum beyond the table range
    double expectation(long long i) {
        constexpr long long kTableMax = 1 << 22;
        if (i > kTableMax) return expectation_direct(i);
        if (static_cast<long long>(w_.size()) <= i) {
            std::size_t old = w_.size();
            w_.resize(static_cast<std::size_t>(((i / 1024) + 1) * 1024),
                      std::numeric_limits<double>::quiet_NaN());
            for (std::size_t y = old; y < w_.size(); ++y)
                w_[y] = expectation_direct(static_cast<long long>(y));
        }
        return w_[static_cast<std::size_t>(i)];
    }

    double expectation_direct(long long i) const {
        const double y = static_cast<double>(i) * unit_;
        double acc = 0.0;
        for (std::size_t j = 0; j < pmf_.size(); ++j) acc += pmf_.prob[j] * h_(y + pmf_.value[j]);
        return acc;
    }

    H h_;
    CostModel model_;
    Pmf pmf_;
    double unit_;
    double action_delta_;
    long long ustep_ = 1;
    std::vector<double> w_;
    std::unordered_map<long long, double> action_memo_;
    std::unordered_map<long long, double> eb_memo_;
};

/**
 * The (c,h)-myopic policy for a tabular h, computed on its grid with
 * transitions clamped at x_max.  Ties break to the smallest action.
 */
inline TabularFunction myopic_policy(const TabularFunction& h, const CostModel& model,
                                     const Pmf& arrivals, const StateGrid& grid) {
    const std::size_t n = grid.size();
    const LatticeArrivals la = lattice_arrivals(arrivals, grid.delta());
    std::vector<double> W(n), u(n), pcost(n);
    for (std::size_t k = 0; k < n; ++k) pcost[k] = model.power_cost(grid.value(k));
    for (std::size_t y = 0; y < n; ++y) {
        double acc = 0.0;
        for (std::size_t j = 0; j < la.offset.size(); ++j)
            acc += la.prob[j] * h[grid.clamp_index(static_cast<long long>(y) + la.offset[j])];
        W[y] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t karg = 0;
        for (std::size_t k = 0; k <= i; ++k) {
            const double cand = pcost[k] + W[i - k];
            if (cand < best) {
                best = cand;
                karg = k;
            }
        }
        u[i] = grid.value(karg);
    }
    return TabularFunction(grid, std::move(u));
}

/// Bellman error of a closed-form h at a single state (untruncated generator).
template <class H>
double bellman_error_mdp(H&& h, const CostModel& model, const Pmf& arrivals, double x,
                         double action_delta, bool refine = true) {
    MyopicEvaluator<std::decay_t<H>> ev(std::forward<H>(h), model, arrivals, action_delta);
    return ev.bellman_error(x, refine);
}

/**
 * Inverse dynamic programming cost c^h(x,u) = c(x,u) - E_B(x) + eta.  The
 * Bellman error uses the lattice actions, so that the triple (c^h, h, eta)
 * satisfies the optimality equation over the same action set.
 */
template <class H>
double perturbed_cost(H&& h, const CostModel& model, const Pmf& arrivals, double x, double u,
                      double eta, double action_delta) {
    const double eb =
        bellman_error_mdp(std::forward<H>(h), model, arrivals, x, action_delta, false);
    return model(x, u) - eb + eta;
}

/// Direct error h*(x) - h(x); both functions vanish at the origin.
template <class H>
double direct_error(const TabularFunction& h_star, H&& h, double x) {
    return h_star.at(x) - h(x);
}

// ---------------------------------------------------------------------------
// Monte-Carlo direct-error bounds (stochastic shortest path sandwich)
// ---------------------------------------------------------------------------

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    long episodes = 0;
    long cap_hits = 0;
};

struct DirectErrorBounds {
    McEstimate lower;  ///< under the optimal policy
    McEstimate upper;  ///< under the (c,h)-myopic policy
};

/**
 * Monte-Carlo estimates of E_x^phi[ sum_{t=0}^{tau0 - 1} (E_B(X(t)) - eta*) ]
 * under phi = phi_star (lower bound) and phi = phi_h (upper bound), where
 * tau0 = min{t >= 1 : X(t) = 0} and the sum always includes t = 0.  At the
 * anchor state x = 0 both bounds are pinned to zero by the normalization
 * h(0) = h*(0) = 0.  Episodes are capped at t_cap steps; cap violations are
 * counted and more than 1% of them raises an error.
 */
template <class H>
DirectErrorBounds direct_error_bounds_mc(H&& h, const CostModel& model, const ArrivalSpec& spec,
                                         const Pmf& pmf, double x, long n_reps,
                                         const Policy& phi_star, const Policy& phi_h,
                                         double eta_star, RngStream& stream, double action_delta,
                                         long t_cap = 1000000) {
    DirectErrorBounds out;
    if (x == 0.0) {
        out.lower.episodes = out.upper.episodes = n_reps;
        return out;
    }
    MyopicEvaluator<std::decay_t<H>> ev(std::forward<H>(h), model, pmf, action_delta);
    const double unit = ev.unit();

    auto run = [&](const Policy& phi) {
        McEstimate est;
        double sum = 0.0, sumsq = 0.0;
        for (long rep = 0; rep < n_reps; ++rep) {
            long long xi = ev.state_index(x);
            double episode = 0.0;
            for (long t = 0;; ++t) {
                if (t >= t_cap) {
                    ++est.cap_hits;
                    break;
                }
                const double xv = static_cast<double>(xi) * unit;
                episode += ev.bellman_error_memo(xv) - eta_star;
                const double u = phi(xv);
                const long long ui = std::llround(u / unit);
                if (ui < 0 || ui > xi || std::abs(u - static_cast<double>(ui) * unit) > 1e-6)
                    throw std::domain_error("direct_error_bounds_mc: policy is not lattice feasible");
                const long long ai = std::llround(spec.sample(stream) / unit);
                xi = xi - ui + ai;
                if (xi == 0) break;  // first return to the origin
            }
            sum += episode;
            sumsq += episode * episode;
            ++est.episodes;
        }
        est.mean = sum / static_cast<double>(n_reps);
        const double var =
            std::max(0.0, sumsq / static_cast<double>(n_reps) - est.mean * est.mean);
        est.se = std::sqrt(var / static_cast<double>(n_reps));
        if (100 * est.cap_hits > n_reps)
            throw std::runtime_error("direct_error_bounds_mc: more than 1% of episodes hit the cap");
        return est;
    };

    out.lower = run(phi_star);
    out.upper = run(phi_h);
    return out;
}

}  // namespace speedscale
