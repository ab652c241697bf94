#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include <dyncav/analysis.hpp>
#include <dyncav/cavity.hpp>

using namespace dyncav;
using Catch::Approx;

namespace {

Series make_series(double (*f)(double), double t0, double t1, int n) {
    Series s;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + (t1 - t0) * i / (n - 1);
        s.t.push_back(t);
        s.y.push_back(f(t));
    }
    return s;
}

} // namespace

TEST_CASE("linear fit recovers an exact line") {
    const auto s = make_series([](double t) { return 0.7 * t + 2.5; }, 0.0, 10.0, 50);
    const auto r = linear_fit(s, {0.0, 10.0});
    CHECK(r.a == Approx(0.7).epsilon(1e-12));
    CHECK(r.b == Approx(2.5).epsilon(1e-12));
    CHECK(r.residual_rms < 1e-12);
    CHECK(r.n_points == 50);
}

TEST_CASE("window restricts the fitted points") {
    // slope changes at t = 5; the window must isolate the second branch
    Series s;
    for (int i = 0; i <= 100; ++i) {
        const double t = 0.1 * i;
        s.t.push_back(t);
        s.y.push_back(t < 5.0 ? 0.1 * t : 2.0 * t - 9.5);
    }
    const auto r = linear_fit(s, {5.0, 10.0});
    CHECK(r.a == Approx(2.0).epsilon(1e-10));
    CHECK(r.b == Approx(-9.5).epsilon(1e-8));
}

TEST_CASE("power-law fit recovers an exact power") {
    const auto s = make_series([](double t) { return 3.0 * std::pow(t, 1.73); }, 0.5, 20.0, 80);
    const auto r = power_law_fit(s, {0.5, 20.0});
    CHECK(r.alpha == Approx(1.73).epsilon(1e-10));
    CHECK(r.beta == Approx(3.0).epsilon(1e-9));
}

TEST_CASE("fits are invariant under sample reordering") {
    auto s = make_series([](double t) { return 1.3 * t + 0.2; }, 1.0, 9.0, 40);
    std::mt19937 rng(7);
    std::vector<std::size_t> idx(s.t.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    Series shuffled;
    for (auto i : idx) {
        shuffled.t.push_back(s.t[i]);
        shuffled.y.push_back(s.y[i]);
    }
    const auto a = linear_fit(s, {1.0, 9.0});
    const auto b = linear_fit(shuffled, {1.0, 9.0});
    CHECK(a.a == Approx(b.a).epsilon(1e-12));
    CHECK(a.b == Approx(b.b).epsilon(1e-12));
}

TEST_CASE("degenerate fit inputs are rejected") {
    Series s;
    s.t = {1.0, 2.0};
    s.y = {1.0, 2.0};
    CHECK_THROWS_AS(linear_fit(s, {0.0, 3.0}), std::invalid_argument);

    Series flat;
    flat.t = {2.0, 2.0, 2.0};
    flat.y = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(linear_fit(flat, {0.0, 3.0}), std::invalid_argument);

    Series neg;
    neg.t = {1.0, 2.0, 3.0};
    neg.y = {1.0, -2.0, 3.0};
    CHECK_THROWS_AS(power_law_fit(neg, {0.0, 4.0}), std::invalid_argument);
}

TEST_CASE("default linear regime window") {
    // tau = (pi/2)(eps/l0) t in [1/2, 1]
    const auto w = linear_regime_window(0.02, 50.0);
    CHECK(w.t_lo == Approx(0.5 * 2.0 * 50.0 / (pi * 0.02)));
    CHECK(w.t_hi == Approx(2.0 * w.t_lo));
    CHECK(w.t_lo == Approx(795.77).epsilon(1e-4));
}

TEST_CASE("cut-off convergence comparison") {
    SECTION("identical spectra give zero deviation") {
        const std::vector<double> a{1.0, 0.5, 0.25};
        const auto rep = convergence_compare(a, a);
        CHECK(rep.common_modes == 3);
        CHECK(rep.max_rel_deviation == 0.0);
        CHECK(rep.worst_mode == 0);
    }

    SECTION("only the common range is compared") {
        const std::vector<double> a{1.0, 0.5};
        const std::vector<double> b{1.0, 0.55, 0.1, 0.01};
        const auto rep = convergence_compare(a, b);
        CHECK(rep.common_modes == 2);
        CHECK(rep.max_rel_deviation == Approx(0.05 / 0.55));
        CHECK(rep.worst_mode == 2);
    }

    SECTION("symmetric in its arguments") {
        const std::vector<double> a{1.0, 0.4, 0.1};
        const std::vector<double> b{1.1, 0.38, 0.12};
        const auto ab = convergence_compare(a, b);
        const auto ba = convergence_compare(b, a);
        CHECK(ab.max_rel_deviation == Approx(ba.max_rel_deviation));
        CHECK(ab.worst_mode == ba.worst_mode);
    }

    SECTION("numerically empty modes carry no signal") {
        const std::vector<double> a{1.0, 1e-18};
        const std::vector<double> b{1.0, 3e-18};
        const auto rep = convergence_compare(a, b);
        CHECK(rep.rel_deviation[1] == 0.0); // below the floor in both runs
    }
}
