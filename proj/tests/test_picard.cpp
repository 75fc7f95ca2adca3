// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>

#include <cmath>

#include "vexsde/analysis.hpp"
#include "vexsde/picard.hpp"

using namespace vexsde;

namespace {

ModelSpec gbm(double T = 1.0) {
    return make_model(exponent::constant(1.0), exponent::constant(1.0), coefficient::make_const(0.05),
                      coefficient::make_const(0.2), 1.0, T);
}

ModelSpec remark1_model(double T = 1.0) {
    return make_model(exponent::remark1(), exponent::remark1(), coefficient::make_const(1.0),
                      coefficient::make_const(1.0), 1.0, T);
}

// x' = x, deterministic: sigma == 0.
ModelSpec exponential(double T = 1.0) {
    ModelOptions opt;
    opt.allow_degenerate = true;
    return make_model(exponent::constant(1.0), exponent::constant(1.0), coefficient::make_const(1.0),
                      coefficient::make_const(0.0), 1.0, T, opt);
}

// Positive root of a tau^2 + b tau - c^2 = 0, written independently of the library.
double oracle_T_star(double L, double mu, double sigma, double c) {
    const double a = 2.0 * L * L * mu * mu;
    const double b = 2.0 * L * L * sigma * sigma;
    return (-b + std::sqrt(b * b + 4.0 * a * c * c)) / (2.0 * a);
}

double sup_abs_diff(const Ensemble& x, const Ensemble& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) s = std::max(s, std::abs(x.values[i] - y.values[i]));
    return s;
}

}  // namespace

TEST_CASE("contraction plan", "[picard]") {
    const auto r = remark1_model();
    const auto plan = make_contraction_plan(r, 0.0, 1.0);
    CHECK(plan.T_star == Catch::Approx(oracle_T_star(r.L, 1.0, 1.0, 0.5)).epsilon(1e-13));
    CHECK(plan.c(plan.T_star) == Catch::Approx(0.5).epsilon(1e-13));
    CHECK(plan.T_star == Catch::Approx(0.0190667).epsilon(1e-5));
    CHECK(plan.n_intervals == 53);
    CHECK(plan.interval_length <= plan.T_star);
    CHECK(plan.interval_length * 53 == Catch::Approx(1.0).epsilon(1e-15));

    const auto g = make_contraction_plan(gbm(), 0.0, 1.0);
    CHECK(g.T_star == Catch::Approx(oracle_T_star(0.2525, 0.05, 0.2, 0.5)).epsilon(1e-13));
    CHECK(g.n_intervals == 1);

    // sigma == 0 leaves only the drift term: c = sqrt(2) L mu tau.
    const auto e = make_contraction_plan(exponential(), 0.0, 1.0);
    CHECK(e.T_star == Catch::Approx(0.5 / (std::sqrt(2.0) * 1.01)).epsilon(1e-13));
    CHECK_THROWS_AS(make_contraction_plan(r, 0.0, 1.0, 1.5), Error);
    CHECK(plan.formula.find("subinterval") != std::string::npos);
}

TEST_CASE("first Picard iterate of the exponential", "[picard]") {
    const auto m = exponential();
    const PathGrid grid{0.0, 0.3, 300};
    const auto dw = Increments::draw(grid, 1, 2);
    const auto x0 = Ensemble::constant(grid, {1.0, 2.0});
    const auto x1 = phi_apply(m, x0, dw);
    const auto x2 = phi_apply(m, x1, dw);
    for (std::size_t i = 0; i < 2; ++i) {
        const double s = x0.start[i];
        for (std::size_t k = 0; k <= grid.n_steps; ++k) {
            const double t = grid.time(k);
            REQUIRE(x1.row(i)[k] == Catch::Approx(s * (1.0 + t)).epsilon(1e-12));
            // Left Riemann sum of 1 + t: exact value t + t^2/2 - t dt/2.
            REQUIRE(std::abs(x2.row(i)[k] - s * (1.0 + t + 0.5 * t * t)) <= s * t * grid.dt());
        }
    }
}

TEST_CASE("deterministic Picard ratios follow the exponential series", "[picard]") {
    const double tau = 0.1;
    const auto m = exponential(tau);
    const PathGrid grid{0.0, tau, 20000};
    FixedPointOptions opt;
    opt.tol = 1e-14;
    const auto res = solve_fixed_point(m, grid, 1, 2, opt);
    const double c = make_contraction_plan(m, 0.0, tau).c(tau);
    REQUIRE(res.converged);
    REQUIRE(res.log.size() >= 5);
    for (std::size_t j = 1; j < 5; ++j) {
        const double n = static_cast<double>(res.log[j].iteration);
        // ||X_n - X_{n-1}|| = ||t^n / n!||, so the ratio is tau/n sqrt((2n-1)/(2n+1)).
        const double oracle = tau / n * std::sqrt((2.0 * n - 1.0) / (2.0 * n + 1.0));
        CHECK(res.log[j].ratio == Catch::Approx(oracle).epsilon(2e-3));
        CHECK(res.log[j].ratio <= c);
    }
}

TEST_CASE("GBM fixed point is the Euler recursion", "[picard]") {
    const auto m = gbm();
    const PathGrid grid{0.0, 1.0, 200};
    FixedPointOptions opt;
    opt.tol = 1e-13;
    const auto res = solve_fixed_point(m, grid, 7, 50, opt);
    REQUIRE(res.converged);
    for (std::size_t i = 0; i < 50; ++i) {
        const auto p = simulate_path(m, grid, Scheme::euler, 7, i);
        for (std::size_t k = 0; k <= grid.n_steps; ++k) REQUIRE(std::abs(res.solution.row(i)[k] - p.values[k]) <= 1e-10);
    }
}

TEST_CASE("GBM converges within the geometric-series iteration count", "[picard]") {
    const auto m = gbm(30.0);
    const auto plan = make_contraction_plan(m, 0.0, 30.0);
    const PathGrid grid{0.0, plan.T_star, 400};
    FixedPointOptions opt;
    opt.tol = 1e-6;
    const auto res = solve_fixed_point(m, grid, 3, 500, opt);
    REQUIRE(res.converged);
    const double first = res.log.front().norm;
    const auto bound = static_cast<std::size_t>(std::ceil(std::log(opt.tol / first) / std::log(0.5)));
    CHECK(res.log.size() <= bound + 1);
}

TEST_CASE("infinite tolerance stops after one application", "[picard]") {
    FixedPointOptions opt;
    opt.tol = std::numeric_limits<double>::infinity();
    const PathGrid grid{0.0, 0.01, 10};
    const auto res = solve_fixed_point(remark1_model(), grid, 1, 8, opt);
    CHECK(res.log.size() == 1);
    CHECK(res.converged);
    const auto dw = Increments::draw(grid, 1, 8);
    const auto x1 = phi_apply(remark1_model(), Ensemble::constant(grid, std::vector<double>(8, 1.0)), dw);
    CHECK(res.solution.values == x1.values);
}

TEST_CASE("intervals longer than T* are refused", "[picard]") {
    const auto r = remark1_model();
    try {
        solve_fixed_point(r, PathGrid{0.0, 0.5, 50}, 1, 4);
        FAIL("expected plan error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Plan);
    }
}

TEST_CASE("stalled iteration raises non-convergence", "[picard]") {
    const auto m = exponential(10.0);
    FixedPointOptions opt;
    opt.enforce_plan = false;
    opt.max_iter = 3;
    opt.tol = 1e-12;
    try {
        solve_fixed_point(m, PathGrid{0.0, 10.0, 1000}, 1, 2, opt);
        FAIL("expected non-convergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvergence);
    }
}

TEST_CASE("shape mismatches are rejected", "[picard]") {
    const auto m = remark1_model();
    const PathGrid grid{0.0, 0.01, 10};
    const auto dw = Increments::draw(grid, 1, 4);
    CHECK_THROWS_AS(phi_apply(m, Ensemble::constant(grid, std::vector<double>(3, 1.0)), dw), Error);
    CHECK_THROWS_AS(phi_apply(m, Ensemble::constant(PathGrid{0.0, 0.01, 11}, std::vector<double>(4, 1.0)), dw), Error);
    CHECK_THROWS_AS(norm_T(Ensemble::constant(grid, std::vector<double>(4, 1.0)),
                           Ensemble::constant(grid, std::vector<double>(5, 1.0))),
                    Error);
}

TEST_CASE("Phi contracts random ensembles at rate c", "[picard][property]") {
    const auto r = remark1_model();
    const auto plan = make_contraction_plan(r, 0.0, 1.0);
    const PathGrid grid{0.0, plan.T_star, 20};
    const std::size_t n = 4000;
    const auto dw = Increments::draw(grid, 99, n);
    for (std::uint64_t s : {1u, 2u, 3u}) {
        // Two adapted ensembles: simulated paths from different starts and seeds.
        Ensemble x = Ensemble::constant(grid, std::vector<double>(n, 1.0));
        Ensemble y = Ensemble::constant(grid, std::vector<double>(n, 1.0));
        const auto rx = r.with_x0(0.5 + 0.25 * static_cast<double>(s));
        const auto ry = r.with_x0(2.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto px = simulate_path(rx, grid, Scheme::euler, 100 + s, i);
            const auto py = simulate_path(ry, grid, Scheme::euler, 200 + s, i);
            std::copy(px.values.begin(), px.values.end(), x.row(i).begin());
            std::copy(py.values.begin(), py.values.end(), y.row(i).begin());
        }
        const auto fx = phi_apply(r, x, dw);
        const auto fy = phi_apply(r, y, dw);
        const auto [ratio, se] = norm_ratio(norm_T(fx, fy), norm_T(x, y));
        INFO("seed offset " << s << ": ratio " << ratio << " +- " << se);
        CHECK(ratio <= plan.c(plan.T_star) + 3.0 * se);
    }
}

TEST_CASE("fixed points from different starts coincide", "[picard][property]") {
    const auto r = remark1_model();
    const auto plan = make_contraction_plan(r, 0.0, 1.0);
    const auto dw = Increments::draw(PathGrid{0.0, plan.T_star, 20}, 5, 2000);
    FixedPointOptions a;
    a.tol = 1e-8;
    FixedPointOptions b = a;
    b.initial_scale = 2.0;
    const auto ra = solve_fixed_point(r, dw, std::vector<double>(2000, 1.0), a);
    const auto rb = solve_fixed_point(r, dw, std::vector<double>(2000, 1.0), b);
    REQUIRE(ra.converged);
    REQUIRE(rb.converged);
    CHECK(norm_T(ra.solution, rb.solution).value <= 2.0 * a.tol);
    // Residual of the discrete equation.
    CHECK(norm_T(ra.solution, phi_apply(r, ra.solution, dw)).value < a.tol);
    for (std::size_t j = 1; j < ra.log.size(); ++j) {
        if (ra.log[j].at_roundoff) continue;
        CHECK(ra.log[j].ratio <= ra.c + 3.0 * ra.log[j].ratio_se);
    }
}

TEST_CASE("global solve chains subintervals", "[picard]") {
    const auto r = remark1_model();
    const double T_star = make_contraction_plan(r, 0.0, 1.0).T_star;
    const auto m = r;  // horizon 3 T* < 1
    FixedPointOptions opt;
    opt.tol = 1e-13;
    const auto res = solve_global(m, 0.0, 3.0 * T_star, T_star / 10.0, 4, 300, opt);
    REQUIRE(res.plan.n_intervals == 3);
    REQUIRE(res.pieces.size() == 3);
    for (std::size_t k = 0; k + 1 < 3; ++k) {
        CHECK(res.intervals[k].converged);
        CHECK(res.pieces[k].grid.T == res.pieces[k + 1].grid.t0);
        for (std::size_t i = 0; i < 300; ++i) REQUIRE(res.pieces[k].row(i).back() == res.pieces[k + 1].row(i).front());
    }
    const auto full = res.full();
    CHECK(full.grid.n_steps == 30);
    for (std::size_t i = 0; i < 300; ++i) REQUIRE(full.row(i).back() == res.terminal()[i]);
    // Chained increments continue the same per-path stream.
    const auto path = simulate_path(m.with_x0(1.0), PathGrid{0.0, 3.0 * T_star, 30}, Scheme::euler, 4, 17);
    for (std::size_t k = 0; k <= 30; ++k) CHECK(full.row(17)[k] == Catch::Approx(path.values[k]).epsilon(1e-9));
}

TEST_CASE("global GBM terminal mean", "[picard][statistical]") {
    const auto res = solve_global(gbm(), 0.0, 1.0, 1e-3, 42, 20000);
    const auto est = summarize(res.terminal());
    CHECK(res.plan.n_intervals == 1);
    CHECK(std::abs(est.mean - std::exp(0.05)) <= 3.0 * est.std_error);
}

TEST_CASE("remark1 terminal second moment respects the moment bound", "[picard][statistical]") {
    const auto r = remark1_model();
    const auto res = solve_global(r, 0.0, 1.0, 1e-3, 42, 2000);
    const auto bound = moment_bound(r, 2.0);
    for (const auto& iv : res.intervals) {
        REQUIRE(iv.converged);
        REQUIRE(std::isfinite(iv.terminal_second_moment.mean));
        CHECK(iv.terminal_second_moment.mean - 3.0 * iv.terminal_second_moment.std_error <= bound(iv.t_end));
    }
}

TEST_CASE("global solve is thread-count invariant", "[picard][property]") {
    const auto r = remark1_model(0.1);
    const auto a = solve_global(r, 0.0, 0.1, 1e-3, 8, 500, {}, Execution{1});
    const auto b = solve_global(r, 0.0, 0.1, 1e-3, 8, 500, {}, Execution{8});
    CHECK(a.full().values == b.full().values);
    REQUIRE(a.intervals.size() == b.intervals.size());
    for (std::size_t k = 0; k < a.intervals.size(); ++k) {
        REQUIRE(a.intervals[k].log.size() == b.intervals[k].log.size());
        for (std::size_t j = 0; j < a.intervals[k].log.size(); ++j) {
            CHECK(a.intervals[k].log[j].norm == b.intervals[k].log[j].norm);
        }
    }
}
