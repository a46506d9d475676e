#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "speedscale/arrivals.hpp"
#include "speedscale/basis.hpp"
#include "speedscale/cost.hpp"
#include "speedscale/dp.hpp"
#include "speedscale/policy.hpp"
#include "speedscale/rng.hpp"

namespace speedscale {

struct StepRecord {
    double x;
    double u;
    double c;
};

/// Simulated trajectory; transition t goes from steps[t].x to steps[t+1].x
/// (or to x_end for the last step).
struct Trace {
    std::vector<StepRecord> steps;
    double x_end = 0.0;
};

/**
 * Simulate the controlled queue under a fixed policy, drawing arrivals with
 * `draw(stream)`.  Bit-exact reproducible given the stream key.  Throws if the
 * policy ever emits an infeasible action.
 */
template <class DrawFn>
Trace simulate_chain_with(const Policy& policy, const CostModel& model, DrawFn&& draw, double x0,
                          long n_steps, RngStream& stream) {
    if (x0 < 0.0) throw std::invalid_argument("simulate_chain: x0 must be nonnegative");
    Trace tr;
    tr.steps.reserve(static_cast<std::size_t>(n_steps));
    double x = x0;
    for (long t = 0; t < n_steps; ++t) {
        double u = policy(x);
        if (u < 0.0 || u > x + 1e-9 * std::max(1.0, x))
            throw std::domain_error("simulate_chain: policy action outside [0, x]");
        u = std::min(u, x);
        tr.steps.push_back({x, u, model(x, u)});
        x = std::max(0.0, x - u) + draw(stream);
    }
    tr.x_end = x;
    return tr;
}

inline Trace simulate_chain(const Policy& policy, const CostModel& model, const ArrivalSpec& spec,
                            double x0, long n_steps, RngStream& stream) {
    return simulate_chain_with(
        policy, model, [&spec](RngStream& s) { return spec.sample(s); }, x0, n_steps, stream);
}

struct LstdResult {
    std::vector<double> theta;
    double eta_hat = 0.0;
    long n_samples = 0;
    double condition = 0.0;  ///< condition number of the regularized LSTD matrix
};

/**
 * LSTD(0) for the average-cost Poisson equation over a linear basis.
 * Two-pass: eta_hat is the full-trace mean cost, then
 *   A = (1/n) sum psi(X_t) (psi(X_t) - psi(X_{t+1}))^T
 *   b = (1/n) sum psi(X_t) (c_t - eta_hat)
 * and theta solves (A + ridge I) theta = b with ridge = ridge_eps * |A|_F.
 * The reported coefficients are projected onto [-20, 20] per coordinate.
 */
inline LstdResult lstd_average_cost(const Trace& trace, const LinearBasis& basis,
                                    double ridge_eps = 1e-8) {
    const long d = static_cast<long>(basis.dim());
    const long n = static_cast<long>(trace.steps.size());
    if (n < 10 * d) throw std::invalid_argument("lstd_average_cost: trace shorter than 10 d");

    double eta = 0.0;
    for (const auto& s : trace.steps) eta += s.c;
    eta /= static_cast<double>(n);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    std::vector<double> cur, nxt;
    basis.eval(trace.steps[0].x, cur);
    Eigen::VectorXd psi(d), psi_next(d);
    for (long i = 0; i < d; ++i) psi(i) = cur[static_cast<std::size_t>(i)];
    for (long t = 0; t < n; ++t) {
        const double x_next = (t + 1 < n) ? trace.steps[static_cast<std::size_t>(t + 1)].x
                                          : trace.x_end;
        basis.eval(x_next, nxt);
        for (long i = 0; i < d; ++i) psi_next(i) = nxt[static_cast<std::size_t>(i)];
        A.noalias() += psi * (psi - psi_next).transpose();
        b.noalias() += psi * (trace.steps[static_cast<std::size_t>(t)].c - eta);
        psi.swap(psi_next);
    }
    A /= static_cast<double>(n);
    b /= static_cast<double>(n);

    const double ridge = ridge_eps * std::max(A.norm(), 1e-300);
    Eigen::MatrixXd Areg = A + ridge * Eigen::MatrixXd::Identity(d, d);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Areg, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(d - 1);
    const double smax = svd.singularValues()(0);
    Eigen::VectorXd theta = svd.solve(b);
    if (!theta.allFinite())
        throw std::runtime_error("lstd_average_cost: LSTD matrix numerically singular (cond " +
                                 std::to_string(smax / std::max(smin, 1e-300)) + ")");

    LstdResult res;
    res.eta_hat = eta;
    res.n_samples = n;
    res.condition = smax / std::max(smin, 1e-300);
    res.theta.resize(static_cast<std::size_t>(d));
    for (long i = 0; i < d; ++i)
        res.theta[static_cast<std::size_t>(i)] = std::clamp(theta(i), -20.0, 20.0);
    return res;
}

/**
 * Precomputed arrays for a (basis, pmf) pair on the chain lattice:
 * psi_i(y) and the arrival expectations E[psi_i(y + A)].  The tables depend on
 * neither theta nor the trajectory, so one instance can back every policy
 * improvement of a run (or of a whole replication batch) and is safe to share
 * read-only across threads.
 */
class BasisTables {
public:
    BasisTables(const LinearBasis& basis, const Pmf& pmf, double x_hi) : unit_(pmf.lattice_unit) {
        if (!(unit_ > 0.0)) throw std::invalid_argument("BasisTables: pmf has no lattice");
        n_ = static_cast<long long>(std::ceil(x_hi / unit_)) + 1;
        offsets_.reserve(pmf.size());
        long long max_off = 0;
        for (std::size_t j = 0; j < pmf.size(); ++j) {
            const double r = pmf.value[j] / unit_;
            const long long off = std::llround(r);
            if (std::abs(r - static_cast<double>(off)) > 1e-9 * std::max(1.0, r))
                throw std::invalid_argument("BasisTables: arrival support off the lattice");
            offsets_.push_back(off);
            max_off = std::max(max_off, off);
        }
        const std::size_t d = basis.dim();
        psi_.resize(d);
        epsi_.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            auto& col = psi_[i];
            col.resize(static_cast<std::size_t>(n_ + max_off));
            const auto& f = basis.entry(i).f;
            for (long long y = 0; y < n_ + max_off; ++y)
                col[static_cast<std::size_t>(y)] = f(static_cast<double>(y) * unit_);
            auto& ecol = epsi_[i];
            ecol.resize(static_cast<std::size_t>(n_));
            for (long long y = 0; y < n_; ++y) {
                double acc = 0.0;
                for (std::size_t j = 0; j < offsets_.size(); ++j)
                    acc += pmf.prob[j] * col[static_cast<std::size_t>(y + offsets_[j])];
                ecol[static_cast<std::size_t>(y)] = acc;
            }
        }
    }

    double unit() const { return unit_; }
    long long range() const { return n_; }

    /// E[h^theta(y + A)] at lattice index y, from the tables.
    double expectation(const std::vector<double>& theta, long long y) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i)
            acc += theta[i] * epsi_[i][static_cast<std::size_t>(y)];
        return acc;
    }

private:
    double unit_;
    long long n_ = 0;
    std::vector<long long> offsets_;
    std::vector<std::vector<double>> psi_;
    std::vector<std::vector<double>> epsi_;
};

/**
 * Myopic policy for h^theta over the basis, as a functional closure.  The
 * argmin is over lattice actions {0, delta, ..., x} with ties to the smallest
 * action; results are memoized on the chain lattice, so simulation needs no
 * state truncation.  A shared BasisTables instance removes all per-policy
 * precomputation; states beyond its range fall back to direct evaluation.
 */
inline Policy policy_improvement(const std::vector<double>& theta, const LinearBasis& basis,
                                 const CostModel& model, const Pmf& pmf, double action_delta,
                                 std::shared_ptr<const BasisTables> tables = nullptr) {
    if (theta.size() != basis.dim())
        throw std::invalid_argument("policy_improvement: theta dimension mismatch");
    if (!tables) {
        // large enough for typical excursions of the controlled chain; rare
        // states beyond it use the extension path
        tables = std::make_shared<BasisTables>(basis, pmf, 400.0);
    }
    struct State {
        std::vector<double> theta;
        LinearBasis basis;
        CostModel model;
        Pmf pmf;
        double delta;
        double unit;
        long long ustep;
        std::shared_ptr<const BasisTables> tables;
        std::unordered_map<long long, double> memo;
        // extension beyond the shared tables, for the transient excursions of
        // degenerate intermediate policies: h on the lattice plus its arrival
        // convolution, grown in chunks
        std::vector<long long> offsets;
        std::vector<double> hv;     // h(y) for y in [0, hv.size())
        std::vector<double> ext_w;  // E[h(y+A)] for y in [0, ext_w.size())

        double h_at(double xv) const {
            double acc = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i) acc += theta[i] * basis.entry(i).f(xv);
            return acc;
        }

        void ensure(long long y) {
            if (y < static_cast<long long>(ext_w.size())) return;
            const long long max_off = offsets.empty() ? 0 : offsets.back();
            const long long n_new = ((y / 8192) + 1) * 8192;
            const std::size_t hv_need = static_cast<std::size_t>(n_new + max_off);
            for (std::size_t k = hv.size(); k < hv_need; ++k)
                hv.push_back(h_at(static_cast<double>(k) * unit));
            const std::size_t old = ext_w.size();
            ext_w.resize(static_cast<std::size_t>(n_new));
            for (std::size_t yy = old; yy < ext_w.size(); ++yy) {
                double acc = 0.0;
                for (std::size_t j = 0; j < offsets.size(); ++j)
                    acc += pmf.prob[j] * hv[yy + static_cast<std::size_t>(offsets[j])];
                ext_w[yy] = acc;
            }
        }

        double expectation(long long y) {
            if (y < tables->range()) return tables->expectation(theta, y);
            ensure(y);
            return ext_w[static_cast<std::size_t>(y)];
        }

        double objective(long long i, long long k) {
            return model.power_cost(static_cast<double>(k) * delta) + expectation(i - k * ustep);
        }

        // scan of the action lattice: exact when the range is small, otherwise
        // strided passes narrowed around the best candidate (exact for
        // unimodal objectives, deterministic local minimum otherwise)
        std::pair<long long, double> scan(long long i) {
            long long lo = 0, hi = i / ustep;
            long long stride = 1;
            while ((hi - lo) / stride > 4096) stride *= 64;
            while (true) {
                long long karg = lo;
                double best = std::numeric_limits<double>::infinity();
                for (long long k = lo; k <= hi; k += stride) {
                    const double v = objective(i, k);
                    if (v < best) {
                        best = v;
                        karg = k;
                    }
                }
                if ((hi - lo) % stride != 0) {
                    const double v = objective(i, hi);  // keep the endpoint
                    if (v < best) {
                        best = v;
                        karg = hi;
                    }
                }
                if (stride == 1) return {karg, best};
                lo = std::max<long long>(0, karg - stride);
                hi = std::min<long long>(i / ustep, karg + stride);
                stride = std::max<long long>(1, stride / 64);
            }
        }

        double action(double x) {
            const long long i = std::llround(x / unit);
            if (i < 0 || std::abs(x - static_cast<double>(i) * unit) > 1e-6 * std::max(1.0, x))
                throw std::domain_error("policy_improvement: state off the chain lattice");
            const auto it = memo.find(i);
            if (it != memo.end()) return it->second;
            auto [karg, best] = scan(i);
            double u_best = static_cast<double>(karg) * delta;
            if (i % ustep != 0) {
                // the full-drain action when the state is off the action lattice
                const double xv = static_cast<double>(i) * unit;
                const double v = model.power_cost(xv) + expectation(0);
                if (v < best) u_best = xv;
            }
            memo.emplace(i, u_best);
            return u_best;
        }
    };
    auto st = std::make_shared<State>(State{theta, basis, model, pmf, action_delta,
                                            pmf.lattice_unit,
                                            std::llround(action_delta / pmf.lattice_unit),
                                            std::move(tables),
                                            {},
                                            {},
                                            {},
                                            {}});
    if (st->ustep < 1 ||
        std::abs(action_delta / pmf.lattice_unit - static_cast<double>(st->ustep)) > 1e-9)
        throw std::invalid_argument("policy_improvement: action lattice must refine the chain lattice");
    st->offsets.reserve(st->pmf.size());
    for (std::size_t j = 0; j < st->pmf.size(); ++j) {
        const double r = st->pmf.value[j] / st->unit;
        st->offsets.push_back(std::llround(r));
    }
    return Policy([st](double x) { return st->action(x); }, "myopic-h-theta");
}

struct TdpiaStage {
    int stage = 0;
    std::vector<double> theta;
    double eta_hat = 0.0;
    double lstd_condition = 0.0;
};

struct TdpiaTrace {
    std::vector<TdpiaStage> stages;
    Policy final_policy;
};

struct TdpiaConfig {
    int stages = 4;
    long steps_per_stage = 30000;
    double x0 = 0.0;
    double ridge_eps = 1e-8;
    double action_delta = 1.0 / 24.0;
    std::shared_ptr<const BasisTables> tables;  ///< optional shared policy tables
};

/**
 * Policy iteration with LSTD policy evaluation: each stage simulates a fresh
 * trajectory under the current policy, fits theta by LSTD, and improves the
 * policy myopically against h^theta.  `draw` supplies arrivals (so coupled
 * experiments can share one arrival construction); `pmf` is the marginal used
 * by the improvement step.
 */
template <class DrawFn>
TdpiaTrace tdpia(const LinearBasis& basis, const Policy& phi0, const CostModel& model,
                 const Pmf& pmf, DrawFn&& draw, const TdpiaConfig& cfg, RngStream& stream) {
    if (cfg.stages < 1) throw std::invalid_argument("tdpia: need at least one stage");
    std::shared_ptr<const BasisTables> tables = cfg.tables;
    if (!tables) tables = std::make_shared<BasisTables>(basis, pmf, 400.0);
    TdpiaTrace out;
    Policy phi = phi0;
    for (int k = 1; k <= cfg.stages; ++k) {
        const Trace tr = simulate_chain_with(phi, model, draw, cfg.x0, cfg.steps_per_stage, stream);
        const LstdResult fit = lstd_average_cost(tr, basis, cfg.ridge_eps);
        out.stages.push_back({k, fit.theta, fit.eta_hat, fit.condition});
        phi = policy_improvement(fit.theta, basis, model, pmf, cfg.action_delta, tables);
    }
    out.final_policy = phi;
    return out;
}

inline TdpiaTrace tdpia(const LinearBasis& basis, const Policy& phi0, const CostModel& model,
                        const ArrivalSpec& spec, const TdpiaConfig& cfg, RngStream& stream) {
    return tdpia(
        basis, phi0, model, spec.pmf(), [&spec](RngStream& s) { return spec.sample(s); }, cfg,
        stream);
}

}  // namespace speedscale
