#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "speedscale/config.hpp"
#include "speedscale/coupling.hpp"
#include "speedscale/diffusion.hpp"
#include "speedscale/dp.hpp"
#include "speedscale/io.hpp"
#include "speedscale/parallel.hpp"
#include "speedscale/td.hpp"

namespace speedscale {

namespace detail {

inline Policy initial_policy() {
    return Policy([](double x) { return std::min(x, 1.0); }, "min(x,1)");
}

struct Ground {
    StateGrid grid;
    Pmf pmf;
    CostModel model;
    ViaResult via;
    TabularFunction phi_star;
};

/// Solve the truncated ACOE by value iteration, initialized with K*.
inline Ground solve_ground_truth(const Config& cfg) {
    const StateGrid grid(cfg.delta, cfg.x_max);
    const ArrivalSpec spec = ArrivalSpec::scaled_geometric(cfg.p_geo, cfg.delta);
    const Pmf pmf = spec.pmf(cfg.tail_eps);
    const CostModel model = CostModel::quadratic(cfg.nu);
    const KStar ks{cfg.alpha};
    const TabularFunction V0 =
        TabularFunction::tabulate(grid, [&](double x) { return ks.value(x); });
    ViaResult via = value_iteration(model, pmf, grid, V0, {cfg.via_max_iters, cfg.via_tol});
    TabularFunction phi = myopic_policy(via.h, model, pmf, grid);
    return Ground{grid, pmf, model, std::move(via), std::move(phi)};
}

/// Normalized error |eta - E_B(x)| / (c(x,u) + 1) at u = 0 (the worst case in u).
inline double normalized_error_at(double eta, double bellman, double cost_u0) {
    return std::abs(eta - bellman) / (cost_u0 + 1.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual experiments
// ---------------------------------------------------------------------------

inline void run_via_convergence(const Config& cfg, std::uint64_t seed,
                                const std::filesystem::path& dir) {
    RunManifest man{"via-convergence", cfg.to_json(), seed, {"error_trace.csv"}};
    man.write(dir);

    const StateGrid grid(cfg.delta, cfg.x_max);
    const Pmf pmf = ArrivalSpec::scaled_geometric(cfg.p_geo, cfg.delta).pmf(cfg.tail_eps);
    const CostModel model = CostModel::quadratic(cfg.nu);
    const KStar ks{cfg.alpha};

    const ViaStop stop{cfg.via_trace_iters, 0.0};
    const ViaResult from_zero =
        value_iteration(model, pmf, grid, TabularFunction::zeros(grid), stop);
    const ViaResult from_fluid = value_iteration(
        model, pmf, grid, TabularFunction::tabulate(grid, [&](double x) { return ks.value(x); }),
        stop);

    CsvWriter csv(dir / "error_trace.csv", {"n", "error", "series"});
    for (std::size_t n = 0; n < from_zero.error_trace.size(); ++n)
        csv.row({fmt_num(static_cast<double>(n + 1)), fmt_num(from_zero.error_trace[n]), "V0=0"});
    for (std::size_t n = 0; n < from_fluid.error_trace.size(); ++n)
        csv.row(
            {fmt_num(static_cast<double>(n + 1)), fmt_num(from_fluid.error_trace[n]), "V0=Kstar"});

    if (cfg.svg) {
        auto axis = [](const std::vector<double>& tr) {
            SvgSeries s;
            for (std::size_t n = 0; n < tr.size(); ++n) {
                s.x.push_back(static_cast<double>(n + 1));
                s.y.push_back(tr[n]);
            }
            return s;
        };
        SvgSeries a = axis(from_zero.error_trace);
        a.label = "V0=0";
        SvgSeries b = axis(from_fluid.error_trace);
        b.label = "V0=Kstar";
        write_svg_lines(dir / "error_trace.svg", "value iteration error", {a, b}, true);
    }
}

inline void run_policy_compare(const Config& cfg, std::uint64_t seed,
                               const std::filesystem::path& dir) {
    RunManifest man{"policy-compare", cfg.to_json(), seed, {"policies.csv"}};
    man.write(dir);

    detail::Ground g = detail::solve_ground_truth(cfg);
    const KStar ks{cfg.alpha};
    MyopicEvaluator<KStar> myo(ks, g.model, g.pmf, cfg.delta);

    CsvWriter csv(dir / "policies.csv", {"x", "phi_star", "phi_kstar"});
    SvgSeries s1{"phi_star", {}, {}}, s2{"phi_kstar", {}, {}};
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
        const double x = g.grid.value(i);
        const double pk = myo.action(x);
        csv.row_num({x, g.phi_star[i], pk});
        s1.x.push_back(x);
        s1.y.push_back(g.phi_star[i]);
        s2.x.push_back(x);
        s2.y.push_back(pk);
    }
    if (cfg.svg)
        write_svg_lines(dir / "policies.svg", "optimal vs (c,Kstar)-myopic policy", {s1, s2});
}

inline void run_bellman_report(const Config& cfg, std::uint64_t seed,
                               const std::filesystem::path& dir) {
    RunManifest man{"bellman-report", cfg.to_json(), seed, {"error_report.csv"}};
    man.write(dir);

    detail::Ground g = detail::solve_ground_truth(cfg);
    const double eta = g.via.eta_hat;
    const KStar ks{cfg.alpha};
    const DiffusionBasis db{cfg.eta_basis, cfg.q_basis, cfg.alpha};

    MyopicEvaluator<KStar> ev_k(ks, g.model, g.pmf, cfg.delta);
    MyopicEvaluator<DiffusionBasis> ev_d(db, g.model, g.pmf, cfg.delta);

    CsvWriter csv(dir / "error_report.csv",
                  {"x", "series", "bellman", "direct", "normalized", "h", "h_star"});
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
        const double x = g.grid.value(i);
        const double c0 = g.model(x, 0.0);
        const double ebk = ev_k.bellman_error(x, true);
        const double ebd = ev_d.bellman_error(x, true);
        csv.row({fmt_num(x), "kstar", fmt_num(ebk), fmt_num(g.via.h[i] - ks.value(x)),
                 fmt_num(detail::normalized_error_at(eta, ebk, c0)), fmt_num(ks.value(x)),
                 fmt_num(g.via.h[i])});
        csv.row({fmt_num(x), "diffusion_basis", fmt_num(ebd), fmt_num(g.via.h[i] - db.value(x)),
                 fmt_num(detail::normalized_error_at(eta, ebd, c0)), fmt_num(db.value(x)),
                 fmt_num(g.via.h[i])});
    }
}

inline void run_fluid_eval(const Config& cfg, std::uint64_t seed,
                           const std::filesystem::path& dir) {
    RunManifest man{"fluid-eval", cfg.to_json(), seed, {"fluid_table.csv"}};
    man.write(dir);

    const KStar ks{cfg.alpha};
    const DiffusionBasis db{cfg.eta_basis, cfg.q_basis, cfg.alpha};
    CsvWriter csv(dir / "fluid_table.csv",
                  {"x", "kstar", "grad_kstar", "hess_kstar", "jstar_quad", "phi_fluid_quad",
                   "poly_value", "poly_policy", "diffusion_h", "diffusion_grad", "psi2"});
    for (double x = 0.0; x <= cfg.x_max + 1e-9; x += 0.25) {
        const auto [pv, pp] = fluid_poly(x, 2.0, cfg.nu, cfg.alpha);
        csv.row_num({x, ks.value(x), ks.grad(x), ks.hess(x), j_star_quad(x),
                     phi_fluid_quad(x, cfg.alpha), pv, pp, db.value(x), db.grad(x),
                     cfg.q_basis - std::sqrt(2.0 * x + cfg.q_basis * cfg.q_basis)});
    }
}

inline void run_tdpia(const Config& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
    RunManifest man{"tdpia-run", cfg.to_json(), seed, {"stages.csv", "summary.csv"}};
    man.write(dir);

    detail::Ground g = detail::solve_ground_truth(cfg);
    const ArrivalSpec spec = ArrivalSpec::scaled_geometric(cfg.p_geo, cfg.delta);
    const LinearBasis basis = LinearBasis::fluid_diffusion(cfg.eta_basis, cfg.q_basis, cfg.alpha);
    TdpiaConfig tc{cfg.stages, cfg.steps_per_stage, 0.0, 1e-8, cfg.delta};

    RngStream stream(seed, 0, "tdpia-arrivals");
    const TdpiaTrace trace = tdpia(basis, detail::initial_policy(), g.model, spec, tc, stream);

    CsvWriter stages(dir / "stages.csv", {"stage", "theta1", "theta2", "eta_hat"});
    for (const auto& st : trace.stages)
        stages.row_num({static_cast<double>(st.stage), st.theta[0], st.theta[1], st.eta_hat});

    RngStream eval_stream(seed, 0, "tdpia-eval");
    const Trace ev =
        simulate_chain(trace.final_policy, g.model, spec, 0.0, cfg.eval_steps, eval_stream);
    double avg = 0.0;
    for (const auto& s : ev.steps) avg += s.c;
    avg /= static_cast<double>(ev.steps.size());

    CsvWriter summary(dir / "summary.csv",
                      {"theta1", "theta2", "eta_hat_final", "eta_star_via", "final_policy_cost"});
    const auto& last = trace.stages.back();
    summary.row_num({last.theta[0], last.theta[1], last.eta_hat, g.via.eta_hat, avg});
}

inline void run_basis_compare(const Config& cfg, std::uint64_t seed,
                              const std::filesystem::path& dir) {
    RunManifest man{"basis-compare", cfg.to_json(), seed, {"stages.csv", "error_curves.csv"}};
    man.write(dir);

    detail::Ground g = detail::solve_ground_truth(cfg);
    const ArrivalSpec spec = ArrivalSpec::scaled_geometric(cfg.p_geo, cfg.delta);
    const double eta = g.via.eta_hat;
    TdpiaConfig tc{cfg.stages, cfg.steps_per_stage, 0.0, 1e-8, cfg.delta};

    const LinearBasis fluid = LinearBasis::fluid_diffusion(cfg.eta_basis, cfg.q_basis, cfg.alpha);
    const LinearBasis poly = LinearBasis::polynomial();

    // the arrival sample path is held fixed across the two runs: same stream
    // key, and both runs consume one uniform per step
    RngStream sa(seed, 0, "tdpia-arrivals");
    RngStream sb(seed, 0, "tdpia-arrivals");
    const TdpiaTrace run_fluid = tdpia(fluid, detail::initial_policy(), g.model, spec, tc, sa);
    const TdpiaTrace run_poly = tdpia(poly, detail::initial_policy(), g.model, spec, tc, sb);

    CsvWriter stages(dir / "stages.csv", {"basis", "stage", "theta1", "theta2", "eta_hat"});
    for (const auto& st : run_fluid.stages)
        stages.row({"fluid_diffusion", fmt_num(st.stage), fmt_num(st.theta[0]),
                    fmt_num(st.theta[1]), fmt_num(st.eta_hat)});
    for (const auto& st : run_poly.stages)
        stages.row({"polynomial", fmt_num(st.stage), fmt_num(st.theta[0]), fmt_num(st.theta[1]),
                    fmt_num(st.eta_hat)});

    auto h_fluid = fluid.combine(run_fluid.stages.back().theta);
    auto h_poly = poly.combine(run_poly.stages.back().theta);
    MyopicEvaluator<std::function<double(double)>> ev_f(h_fluid, g.model, g.pmf, cfg.delta);
    MyopicEvaluator<std::function<double(double)>> ev_p(h_poly, g.model, g.pmf, cfg.delta);

    CsvWriter curves(dir / "error_curves.csv",
                     {"x", "series", "bellman", "normalized", "h_theta", "h_star"});
    SvgSeries e1{"fluid_diffusion", {}, {}}, e2{"polynomial", {}, {}};
    for (std::size_t i = 0; i < g.grid.size(); ++i) {
        const double x = g.grid.value(i);
        const double c0 = g.model(x, 0.0);
        const double ebf = ev_f.bellman_error(x, true);
        const double ebp = ev_p.bellman_error(x, true);
        const double nf = detail::normalized_error_at(eta, ebf, c0);
        const double np = detail::normalized_error_at(eta, ebp, c0);
        curves.row({fmt_num(x), "fluid_diffusion", fmt_num(ebf), fmt_num(nf), fmt_num(h_fluid(x)),
                    fmt_num(g.via.h[i])});
        curves.row({fmt_num(x), "polynomial", fmt_num(ebp), fmt_num(np), fmt_num(h_poly(x)),
                    fmt_num(g.via.h[i])});
        e1.x.push_back(x);
        e1.y.push_back(nf);
        e2.x.push_back(x);
        e2.y.push_back(np);
    }
    if (cfg.svg)
        write_svg_lines(dir / "error_curves.svg", "normalized error by basis", {e1, e2});
}

struct VarianceStudyCell {
    double theta1 = 0, theta2 = 0, eta = 0;
};

struct VarianceStudyResult {
    std::vector<double> kappas;
    std::vector<std::vector<VarianceStudyCell>> per_rep;  ///< [replication][level]
    std::vector<VarianceStudyCell> mean;                  ///< per level
    std::vector<double> var_theta1, var_theta2;           ///< per level
};

/**
 * Coupled TDPIA replications across the variance levels.  Every level of a
 * replication replays the same shared randomness (same stream key), so the
 * arrival paths are coupled pathwise; replications run in parallel and the
 * result is independent of the worker count.
 */
inline VarianceStudyResult variance_study_core(const Config& cfg, std::uint64_t seed) {
    const CoupledArrivalLevels levels(cfg.kappas);
    const std::size_t L = levels.levels();
    const CostModel model = CostModel::quadratic(cfg.nu);
    const LinearBasis basis = LinearBasis::fluid_diffusion(cfg.eta_basis, cfg.q_basis, cfg.alpha);
    const int R = cfg.replications;
    TdpiaConfig tc{cfg.stages, cfg.steps_per_stage, 0.0, 1e-8, cfg.delta};

    // pathwise monotonicity spot check on a dedicated stream
    {
        RngStream probe(seed, 0, "coupling-check");
        for (int t = 0; t < 1000; ++t) {
            const auto d = levels.draw(probe);
            for (std::size_t i = 1; i < L; ++i)
                if (d.z[i] < d.z[i - 1])
                    throw std::runtime_error("variance-study: coupling monotonicity violated");
        }
    }

    VarianceStudyResult out;
    out.kappas = cfg.kappas;
    out.per_rep.assign(static_cast<std::size_t>(R), std::vector<VarianceStudyCell>(L));
    std::vector<Pmf> pmfs;
    pmfs.reserve(L);
    for (std::size_t l = 0; l < L; ++l) pmfs.push_back(levels.spec(l).pmf(cfg.tail_eps));
    // per-level policy tables, shared read-only by every replication
    std::vector<std::shared_ptr<const BasisTables>> tables(L);
    for (std::size_t l = 0; l < L; ++l)
        tables[l] = std::make_shared<BasisTables>(basis, pmfs[l], 400.0);

    parallel_for(R, cfg.threads, [&](int rep) {
        for (std::size_t level = 0; level < L; ++level) {
            // identical stream key across levels: the draws replay the same
            // shared randomness, each level extracting its own column
            RngStream stream(seed, static_cast<std::uint64_t>(rep), "tdpia-arrivals");
            auto draw = [&levels, level](RngStream& s) { return levels.draw_level(level, s); };
            TdpiaConfig tc_level = tc;
            tc_level.tables = tables[level];
            const TdpiaTrace tr = tdpia(basis, detail::initial_policy(), model, pmfs[level], draw,
                                        tc_level, stream);
            const auto& last = tr.stages.back();
            out.per_rep[static_cast<std::size_t>(rep)][level] =
                VarianceStudyCell{last.theta[0], last.theta[1], last.eta_hat};
        }
    });

    out.mean.resize(L);
    out.var_theta1.resize(L);
    out.var_theta2.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        double m1 = 0, m2 = 0, me = 0, s1 = 0, s2 = 0;
        for (int rep = 0; rep < R; ++rep) {
            const VarianceStudyCell& c = out.per_rep[static_cast<std::size_t>(rep)][l];
            m1 += c.theta1;
            m2 += c.theta2;
            me += c.eta;
        }
        m1 /= R;
        m2 /= R;
        me /= R;
        for (int rep = 0; rep < R; ++rep) {
            const VarianceStudyCell& c = out.per_rep[static_cast<std::size_t>(rep)][l];
            s1 += (c.theta1 - m1) * (c.theta1 - m1);
            s2 += (c.theta2 - m2) * (c.theta2 - m2);
        }
        out.mean[l] = VarianceStudyCell{m1, m2, me};
        out.var_theta1[l] = s1 / std::max(1, R - 1);
        out.var_theta2[l] = s2 / std::max(1, R - 1);
    }
    return out;
}

inline void run_variance_study(const Config& cfg, std::uint64_t seed,
                               const std::filesystem::path& dir) {
    RunManifest man{"variance-study", cfg.to_json(), seed,
                    {"theta_samples.csv", "variance.csv", "normalized_error.csv"}};
    man.write(dir);

    const VarianceStudyResult res = variance_study_core(cfg, seed);
    const std::size_t L = res.kappas.size();
    const int R = cfg.replications;
    const CostModel model = CostModel::quadratic(cfg.nu);
    const LinearBasis basis = LinearBasis::fluid_diffusion(cfg.eta_basis, cfg.q_basis, cfg.alpha);

    CsvWriter samples(dir / "theta_samples.csv",
                      {"kappa", "replication", "theta1", "theta2", "eta_hat"});
    for (int rep = 0; rep < R; ++rep)
        for (std::size_t l = 0; l < L; ++l) {
            const VarianceStudyCell& c = res.per_rep[static_cast<std::size_t>(rep)][l];
            samples.row_num({res.kappas[l], static_cast<double>(rep), c.theta1, c.theta2, c.eta});
        }

    CsvWriter var(dir / "variance.csv",
                  {"kappa", "var_theta1", "var_theta2", "mean_theta1", "mean_theta2", "mean_eta"});
    for (std::size_t l = 0; l < L; ++l)
        var.row_num({res.kappas[l], res.var_theta1[l], res.var_theta2[l], res.mean[l].theta1,
                     res.mean[l].theta2, res.mean[l].eta});

    // normalized-error curves for the mean coefficients, per variance level
    CsvWriter err(dir / "normalized_error.csv", {"kappa", "x", "normalized"});
    for (std::size_t l = 0; l < L; ++l) {
        const Pmf pmf = ArrivalSpec::mixture_for_variance(res.kappas[l]).pmf(cfg.tail_eps);
        auto h = basis.combine({res.mean[l].theta1, res.mean[l].theta2});
        MyopicEvaluator<std::function<double(double)>> ev(h, model, pmf, cfg.delta);
        for (double x = 0.0; x <= 40.0 + 1e-9; x += 0.5) {
            const double eb = ev.bellman_error(x, true);
            err.row_num({res.kappas[l], x,
                         detail::normalized_error_at(res.mean[l].eta, eb, model(x, 0.0))});
        }
    }

    if (cfg.svg) {
        std::vector<double> t2;
        for (int rep = 0; rep < R; ++rep)
            t2.push_back(res.per_rep[static_cast<std::size_t>(rep)][0].theta2);
        write_svg_histogram(dir / "theta2_hist_kappa_min.svg", "theta2, smallest kappa", t2);
    }
}

/**
 * Experiment dispatcher.  Creates the output directory, writes the manifest
 * first, then the result CSVs.  Unknown names raise std::invalid_argument
 * (usage error); numeric failures surface as std::runtime_error.
 */
inline void run_experiment(const std::string& name, Config cfg, std::uint64_t seed,
                           const std::filesystem::path& out_dir) {
    static const std::set<std::string> known = {
        "via-convergence", "policy-compare", "bellman-report", "tdpia-run",
        "basis-compare",   "variance-study", "fluid-eval"};
    if (!known.count(name)) throw std::invalid_argument("unknown experiment '" + name + "'");
    if (cfg.full) cfg.apply_full_scale();
    std::filesystem::create_directories(out_dir);

    if (name == "via-convergence") run_via_convergence(cfg, seed, out_dir);
    else if (name == "policy-compare") run_policy_compare(cfg, seed, out_dir);
    else if (name == "bellman-report") run_bellman_report(cfg, seed, out_dir);
    else if (name == "tdpia-run") run_tdpia(cfg, seed, out_dir);
    else if (name == "basis-compare") run_basis_compare(cfg, seed, out_dir);
    else if (name == "variance-study") run_variance_study(cfg, seed, out_dir);
    else if (name == "fluid-eval") run_fluid_eval(cfg, seed, out_dir);
}

}  // namespace speedscale
