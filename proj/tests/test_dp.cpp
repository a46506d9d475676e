#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "speedscale/diffusion.hpp"
#include "speedscale/dp.hpp"
#include "speedscale/fluid.hpp"
#include "support/oracles.hpp"

using namespace speedscale;

namespace {

Pmf make_pmf(std::vector<double> values, std::vector<double> probs, double unit) {
    Pmf p;
    p.value = std::move(values);
    p.prob = std::move(probs);
    p.lattice_unit = unit;
    double m = 0, m2 = 0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        m += p.value[i] * p.prob[i];
        m2 += p.value[i] * p.value[i] * p.prob[i];
    }
    p.mean = m;
    p.variance = m2 - m * m;
    return p;
}

// Coarse reference chain shared by the solver tests: delta = 1/4, p = 0.8,
// unit mean arrivals.
struct CoarseWorld {
    StateGrid grid{0.25, 60.0};
    ArrivalSpec spec = ArrivalSpec::scaled_geometric(0.8, 0.25);
    Pmf pmf = spec.pmf(1e-10);
    CostModel model = CostModel::quadratic(0.5);
    ViaResult via = value_iteration(
        model, pmf, grid,
        TabularFunction::tabulate(grid, [](double x) { return k_star(x, 1.0); }), {40000, 1e-7});

    CoarseWorld() { REQUIRE(via.converged); }
};

const CoarseWorld& coarse() {
    static CoarseWorld w;
    return w;
}

}  // namespace

TEST_CASE("degenerate single-state chain") {
    const StateGrid grid(1.0, 0.0);  // just the origin
    const Pmf arrivals = make_pmf({0.0}, {1.0}, 1.0);
    const CostModel model = CostModel::exponential(1.0, 1.0);  // c(0,0) = 1
    const ViaResult res =
        value_iteration(model, arrivals, grid, TabularFunction::zeros(grid), {50, 0.0});
    CHECK(res.iterations == 50);
    CHECK(res.V[0] == Catch::Approx(50.0));  // V_n(0) = n c(0,0)
    CHECK(res.h[0] == 0.0);
    CHECK(res.eta_hat == Catch::Approx(1.0).margin(1e-12));
    for (double e : res.error_trace) CHECK(e == 0.0);
}

TEST_CASE("three-point chain matches brute-force policy enumeration") {
    const double delta = 0.5;
    const StateGrid grid(delta, 2.0 * delta);
    const Pmf arrivals = make_pmf({0.0, delta, 2.0 * delta}, {0.5, 0.3, 0.2}, delta);
    const CostModel model = CostModel::quadratic(0.5);

    // oracle: enumerate all stationary policies, solve each exactly
    auto transition = [&](int s, int a) {
        std::vector<double> row(3, 0.0);
        for (std::size_t j = 0; j < arrivals.size(); ++j) {
            int t = s - a + static_cast<int>(j);
            t = std::min(t, 2);
            row[static_cast<std::size_t>(t)] += arrivals.prob[j];
        }
        return row;
    };
    auto cost = [&](int s, int a) { return model(s * delta, a * delta); };
    auto actions = [](int s) {
        std::vector<int> acts;
        for (int a = 0; a <= s; ++a) acts.push_back(a);
        return acts;
    };
    const oracles::BruteForceAcoe oracle = oracles::brute_force_acoe(3, transition, cost, actions);

    const ViaResult res =
        value_iteration(model, arrivals, grid, TabularFunction::zeros(grid), {100000, 1e-10});
    REQUIRE(res.converged);
    CHECK(res.eta_hat == Catch::Approx(oracle.eta).margin(1e-6));
    for (int s = 0; s < 3; ++s)
        CHECK(res.h[static_cast<std::size_t>(s)] ==
              Catch::Approx(oracle.h(s) - oracle.h(0)).margin(1e-6));

    const TabularFunction phi = myopic_policy(res.h, model, arrivals, grid);
    for (int s = 0; s < 3; ++s)
        CHECK(phi[static_cast<std::size_t>(s)] ==
              Catch::Approx(oracle.policy[s] * delta).margin(1e-12));
}

TEST_CASE("acoe residual of the converged solution") {
    const auto& w = coarse();
    const double eta = w.via.eta_hat;
    CHECK(std::abs(w.via.eta_hat - w.via.eta_hat_span) < 1e-5);
    auto h_clamped = [&](double x) { return w.via.h.clamped_at(x); };
    const std::size_t interior = static_cast<std::size_t>(0.9 * w.grid.size());
    MyopicEvaluator<decltype(h_clamped)> ev(h_clamped, w.model, w.pmf, w.grid.delta());
    for (std::size_t i = 0; i < interior; i += 3) {
        const double resid = ev.bellman_error(w.grid.value(i), false) - eta;
        CHECK(std::abs(resid) <= 10.0 * 1e-7);
    }
}

TEST_CASE("relative value function and policy are monotone") {
    const auto& w = coarse();
    const TabularFunction phi = myopic_policy(w.via.h, w.model, w.pmf, w.grid);
    const std::size_t interior = static_cast<std::size_t>(0.9 * w.grid.size());
    for (std::size_t i = 1; i < w.grid.size(); ++i)
        CHECK(w.via.h[i] >= w.via.h[i - 1] - 1e-12);
    for (std::size_t i = 1; i < interior; ++i) CHECK(phi[i] >= phi[i - 1] - 1e-12);
}

TEST_CASE("fluid initialization speeds up value iteration") {
    const auto& w = coarse();
    const KStar ks{1.0};
    const ViaStop stop{120, 0.0};
    const ViaResult from_zero =
        value_iteration(w.model, w.pmf, w.grid, TabularFunction::zeros(w.grid), stop);
    const ViaResult from_fluid = value_iteration(
        w.model, w.pmf, w.grid,
        TabularFunction::tabulate(w.grid, [&](double x) { return ks.value(x); }), stop);
    // this coarse chain reaches the floating-point noise floor quickly; the
    // comparison is meaningful while the slower trace is above it
    for (std::size_t n = 4; n < 120 && from_zero.error_trace[n] > 1e-10; ++n)
        CHECK(from_fluid.error_trace[n] < from_zero.error_trace[n]);
}

TEST_CASE("myopic policy of a flat function serves nothing") {
    const auto& w = coarse();
    const TabularFunction phi =
        myopic_policy(TabularFunction::zeros(w.grid), w.model, w.pmf, w.grid);
    for (std::size_t i = 0; i < w.grid.size(); ++i) CHECK(phi[i] == 0.0);
}

TEST_CASE("policy improvement fixed point at the optimum") {
    const auto& w = coarse();
    const TabularFunction phi_star = myopic_policy(w.via.h, w.model, w.pmf, w.grid);
    const int n = static_cast<int>(w.grid.size());

    // exact Poisson solve for phi_star on the truncated chain
    const LatticeArrivals la = lattice_arrivals(w.pmf, w.grid.delta());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd c(n);
    for (int s = 0; s < n; ++s) {
        const long long u_idx = std::llround(phi_star[static_cast<std::size_t>(s)] / w.grid.delta());
        for (std::size_t j = 0; j < la.offset.size(); ++j) {
            const std::size_t t = w.grid.clamp_index(s - u_idx + la.offset[j]);
            P(s, static_cast<long>(t)) += la.prob[j];
        }
        c(s) = w.model(w.grid.value(static_cast<std::size_t>(s)),
                       phi_star[static_cast<std::size_t>(s)]);
    }
    const double eta_pi = oracles::average_cost(P, c);
    CHECK(eta_pi == Catch::Approx(w.via.eta_hat).margin(5e-4));
    const Eigen::VectorXd h_pi = oracles::poisson_solve(P, c, eta_pi);

    std::vector<double> hv(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) hv[static_cast<std::size_t>(s)] = h_pi(s);
    const TabularFunction h_policy(w.grid, hv);
    const TabularFunction phi2 = myopic_policy(h_policy, w.model, w.pmf, w.grid);

    const std::size_t interior = static_cast<std::size_t>(0.9 * w.grid.size());
    for (std::size_t i = 0; i < interior; ++i)
        CHECK(std::abs(phi2[i] - phi_star[i]) <= w.grid.delta() + 1e-12);
}

TEST_CASE("Bellman error of the fluid value function") {
    const auto& w = coarse();
    const KStar ks{1.0};
    MyopicEvaluator<KStar> ev(ks, w.model, w.pmf, w.grid.delta());

    SECTION("nonnegative on the grid") {
        for (std::size_t i = 0; i < w.grid.size(); i += 2)
            CHECK(ev.bellman_error(w.grid.value(i), true) >= -1e-9);
    }
    SECTION("sqrt growth with the known constant") {
        const double x = 1e4;
        const double ratio = ev.bellman_error(x, true) / std::sqrt(x);
        CHECK(ratio > 0.657);
        CHECK(ratio < 0.757);
    }
    SECTION("myopic policy grows like grad K*, ratio sqrt(2) to sqrt(x)") {
        // the direct minimization gives phi(x) -> grad K*(x) ~ sqrt(2x);
        // frozen bracket around sqrt(2) = 1.414
        const double x = 1e4;
        const double ratio = ev.action(x) / std::sqrt(x);
        CHECK(ratio > 1.35);
        CHECK(ratio < 1.48);
    }
}

TEST_CASE("perturbed cost satisfies the inverse programming identity") {
    const auto& w = coarse();
    const double eta = 1.7;  // arbitrary constant
    const KStar ks{1.0};
    const DiffusionBasis db{2.0, 2.0, 1.0};
    auto square = [](double x) { return x * x; };

    auto check_h = [&](auto h) {
        for (double x : {0.0, 1.0, 7.25, 20.0}) {
            // min_u ( c^h(x,u) + D_u h(x) ) over the lattice actions equals eta
            double best = 1e300;
            const long long imax = std::llround(x / w.grid.delta());
            for (long long k = 0; k <= imax; ++k) {
                const double u = static_cast<double>(k) * w.grid.delta();
                const double ch =
                    perturbed_cost(h, w.model, w.pmf, x, u, eta, w.grid.delta());
                best = std::min(best, ch + generator_apply(h, x, u, w.pmf));
            }
            CHECK(best == Catch::Approx(eta).margin(1e-9));
        }
    };
    check_h(ks);
    check_h(db);
    check_h(square);

    SECTION("the perturbation is action independent") {
        const double d1 = perturbed_cost(ks, w.model, w.pmf, 5.0, 0.0, eta, w.grid.delta()) -
                          w.model(5.0, 0.0);
        const double d2 = perturbed_cost(ks, w.model, w.pmf, 5.0, 2.0, eta, w.grid.delta()) -
                          w.model(5.0, 2.0);
        CHECK(d1 == Catch::Approx(d2).margin(1e-12));
    }
}

TEST_CASE("normalized error of the fluid value function decays") {
    const auto& w = coarse();
    const double eta = w.via.eta_hat;
    const KStar ks{1.0};
    MyopicEvaluator<KStar> ev(ks, w.model, w.pmf, w.grid.delta());
    // E_c(x, u) = |eta - E_B(x)| / (c(x,u) + 1) decreasing over [50, x_max]
    double prev = 1e300;
    for (double x = 50.0; x <= w.grid.x_max() + 1e-9; x += 2.0) {
        const double ec = std::abs(eta - ev.bellman_error(x, false)) / (w.model(x, 0.0) + 1.0);
        CHECK(ec < prev);
        prev = ec;
    }
}

TEST_CASE("direct error of the optimum vanishes") {
    const auto& w = coarse();
    for (double x : {0.0, 1.0, 30.0})
        CHECK(direct_error(w.via.h, [&](double y) { return w.via.h.at(y); }, x) == 0.0);
}

TEST_CASE("direct error of K* grows at most linearly and the ratio tends to one") {
    // deep grid so the midpoint sits far from the truncation boundary
    const StateGrid grid(0.25, 400.0);
    const ArrivalSpec spec = ArrivalSpec::scaled_geometric(0.8, 0.25);
    const Pmf pmf = spec.pmf(1e-10);
    const CostModel model = CostModel::quadratic(0.5);
    const KStar ks{1.0};
    const ViaResult via = value_iteration(
        model, pmf, grid, TabularFunction::tabulate(grid, [&](double x) { return ks.value(x); }),
        {40000, 1e-5});
    REQUIRE(via.converged);

    const double mid = 200.0;
    const double ratio = ks.value(mid) / via.h.at(mid);
    CHECK(ratio > 0.85);
    CHECK(ratio < 1.15);

    // at most linear growth: the secant slopes of E_d = h* - K* stabilize
    // (their increments shrink) instead of accelerating
    auto ed = [&](double x) { return via.h.at(x) - ks.value(x); };
    const double s1 = (ed(100.0) - ed(50.0)) / 50.0;
    const double s2 = (ed(150.0) - ed(100.0)) / 50.0;
    const double s3 = (ed(200.0) - ed(150.0)) / 50.0;
    CHECK(s3 - s2 < s2 - s1);
    CHECK(s3 < 1.0);

    // and the relative error against K* decays in the tail (Ed/K* -> 0)
    double prev = ed(100.0) / ks.value(100.0);
    for (double x = 125.0; x <= 200.0 + 1e-9; x += 25.0) {
        const double r = ed(x) / ks.value(x);
        CHECK(r < prev);
        prev = r;
    }
}

TEST_CASE("Monte-Carlo direct-error bounds") {
    const auto& w = coarse();
    const double eta = w.via.eta_hat;
    const Policy phi_star = Policy::from_table(myopic_policy(w.via.h, w.model, w.pmf, w.grid));

    SECTION("anchor state pins both bounds to zero") {
        const KStar ks{1.0};
        MyopicEvaluator<KStar> myo(ks, w.model, w.pmf, w.grid.delta());
        const Policy phi_k([&](double x) mutable { return myo.action(x); });
        RngStream stream(99, 0, "mc-zero");
        const DirectErrorBounds b = direct_error_bounds_mc(
            ks, w.model, w.spec, w.pmf, 0.0, 100, phi_star, phi_k, eta, stream, w.grid.delta());
        CHECK(b.lower.mean == 0.0);
        CHECK(b.upper.mean == 0.0);
    }

    SECTION("for h = h* both bounds vanish within 3 standard errors") {
        auto h_clamped = [&](double x) { return w.via.h.clamped_at(x); };
        RngStream stream(99, 1, "mc-hstar");
        const DirectErrorBounds b =
            direct_error_bounds_mc(h_clamped, w.model, w.spec, w.pmf, 5.0, 2000, phi_star,
                                   phi_star, eta, stream, w.grid.delta());
        CHECK(std::abs(b.lower.mean) <= 3.0 * b.lower.se + 1e-3);
        CHECK(std::abs(b.upper.mean) <= 3.0 * b.upper.se + 1e-3);
    }

    SECTION("sandwich around the true direct error for h = K*") {
        const KStar ks{1.0};
        MyopicEvaluator<KStar> myo(ks, w.model, w.pmf, w.grid.delta());
        const Policy phi_k([&](double x) mutable { return myo.action(x); });
        RngStream stream(99, 2, "mc-kstar");
        const double x = 20.0;
        const DirectErrorBounds b = direct_error_bounds_mc(
            ks, w.model, w.spec, w.pmf, x, 4000, phi_star, phi_k, eta, stream, w.grid.delta());
        const double ed = w.via.h.at(x) - ks.value(x);
        CHECK(b.lower.mean - 3.0 * b.lower.se <= ed);
        CHECK(ed <= b.upper.mean + 3.0 * b.upper.se);
        CHECK(b.lower.cap_hits == 0);
        CHECK(b.upper.cap_hits == 0);
    }
}
