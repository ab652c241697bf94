#include <catch2/catch_amalgamated.hpp>

#include <dyncav/evolve.hpp>
#include <dyncav/oracles.hpp>

using namespace dyncav;
using Catch::Approx;

namespace {

CavityMotion resonant(int kind, double eps, double l0 = 1.0, double n = 1.0) {
    CavityMotion m;
    m.kind = kind;
    m.l0 = l0;
    m.epsilon = eps;
    m.resonance_index = n;
    return m;
}

IntegratorConfig tight() {
    IntegratorConfig ic;
    ic.rel_tol = 1e-10;
    ic.abs_tol = 1e-13;
    return ic;
}

} // namespace

TEST_CASE("initial state") {
    const auto s = initial_state(Truncation{3});
    CHECK(s.t == 0.0);
    CHECK((s.xi - 2.0 * MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.eta.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(initial_state(Truncation{0}), std::invalid_argument);
}

TEST_CASE("static cavity evolves with free phases") {
    const auto m = resonant(1, 0.0);
    const double t_max = 3.0;
    const auto s = integrate(m, Truncation{4}, tight(), t_max);
    CHECK(s.t == Approx(t_max));
    for (int n = 0; n < 4; ++n) {
        const double w = (n + 1) * pi;
        const cplx expect = 2.0 * std::exp(cplx(0.0, -w * t_max));
        CHECK(std::abs(s.xi(n, n) - expect) < 1e-8);
        for (int mcol = 0; mcol < 4; ++mcol) {
            CHECK(std::abs(s.eta(n, mcol)) < 1e-10);
            if (mcol != n)
                CHECK(std::abs(s.xi(n, mcol)) < 1e-10);
        }
    }
}

TEST_CASE("sampling contract") {
    const auto m = resonant(1, 1e-3);
    IntegratorConfig ic;
    ic.sample_interval = 0.25;
    std::vector<double> times;
    integrate(m, Truncation{3}, ic, 2.0, [&](const EvolutionState& s) { times.push_back(s.t); });
    REQUIRE(times.size() == 9); // floor(2.0/0.25)+1
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(times[i] == Approx(0.25 * i).margin(1e-12));
}

TEST_CASE("dense output matches a direct stop at the sample time") {
    const auto m = resonant(1, 5e-3);
    IntegratorConfig ic = tight();
    ic.sample_interval = 0.7;
    MatrixXcd xi_sampled;
    integrate(m, Truncation{4}, ic, 2.1, [&](const EvolutionState& s) {
        if (std::abs(s.t - 1.4) < 1e-9)
            xi_sampled = s.xi;
    });
    REQUIRE(xi_sampled.size() > 0);
    const auto direct = integrate(m, Truncation{4}, ic, 1.4);
    CHECK((xi_sampled - direct.xi).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("equivalence with the second-order formalism") {
    for (int kind : {1, 2}) {
        const auto m = resonant(kind, 0.01);
        IntegratorConfig ic = tight();
        ic.sample_interval = 5.0;
        const double t_max = 5.0;
        const auto s = integrate(m, Truncation{5}, ic, t_max);
        const auto ref = second_order_reference(m, Truncation{5}, ic, t_max);
        const double dev = std::max((s.xi - ref.xi.back()).cwiseAbs().maxCoeff(),
                                    (s.eta - ref.eta.back()).cwiseAbs().maxCoeff());
        INFO("kind " << kind);
        CHECK(dev < 1e-6);
    }
}

TEST_CASE("tolerance convergence") {
    // Successive tolerance tightenings must converge: the 1e-8 run is far
    // closer to the 1e-10 run than the 1e-6 run is.
    const auto m = resonant(1, 0.01);
    auto run_at = [&](double rtol) {
        IntegratorConfig ic;
        ic.rel_tol = rtol;
        ic.abs_tol = rtol * 1e-3;
        return integrate(m, Truncation{6}, ic, 10.0);
    };
    const auto a = run_at(1e-6), b = run_at(1e-8), c = run_at(1e-10);
    const double dev_ab = (a.xi - c.xi).cwiseAbs().maxCoeff();
    const double dev_bc = (b.xi - c.xi).cwiseAbs().maxCoeff();
    CHECK(dev_bc < dev_ab / 10.0);
    CHECK(dev_bc < 1e-6);
}

TEST_CASE("thread count does not change the result") {
    const auto m = resonant(1, 0.02);
    IntegratorConfig serial;
    serial.sample_interval = 1.0;
    IntegratorConfig threaded = serial;
    threaded.threads = 3;
    const auto a = evolve_columns_parallel(m, Truncation{20}, serial, 3.0);
    const auto b = evolve_columns_parallel(m, Truncation{20}, threaded, 3.0);
    // shared-step mode partitions identical GEMMs, so this is bit-exact
    CHECK((a.xi - b.xi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.eta - b.eta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("per-column stepping agrees with shared stepping") {
    const auto m = resonant(2, 0.01);
    IntegratorConfig shared = tight();
    shared.sample_interval = 1.0;
    IntegratorConfig percol = shared;
    percol.shared_steps = false;
    percol.threads = 2;

    std::vector<double> shared_times, percol_times;
    const auto a = evolve_columns_parallel(m, Truncation{6}, shared, 3.0,
                                           [&](const EvolutionState& s) {
                                               shared_times.push_back(s.t);
                                           });
    const auto b = evolve_columns_parallel(m, Truncation{6}, percol, 3.0,
                                           [&](const EvolutionState& s) {
                                               percol_times.push_back(s.t);
                                           });
    CHECK((a.xi - b.xi).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((a.eta - b.eta).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(shared_times.size() == percol_times.size());
}

TEST_CASE("invalid arguments") {
    const auto m = resonant(1, 0.01);
    IntegratorConfig ic;
    CHECK_THROWS_AS(integrate(m, Truncation{3}, ic, -1.0), std::invalid_argument);
    IntegratorConfig bad;
    bad.rel_tol = 0.0;
    CHECK_THROWS_AS(integrate(m, Truncation{3}, bad, 1.0), std::invalid_argument);
    CavityMotion badm = m;
    badm.epsilon = 0.9;
    CHECK_THROWS_AS(integrate(badm, Truncation{3}, ic, 1.0), std::invalid_argument);
}

TEST_CASE("max_step cap is honored by the controller") {
    const auto m = resonant(1, 0.01);
    IntegratorConfig capped;
    capped.max_step = 0.01;
    IntegrationStats st;
    integrate(m, Truncation{2}, capped, 1.0, {}, &st);
    CHECK(st.steps_accepted >= 100);
}
