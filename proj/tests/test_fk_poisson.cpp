// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "vexsde/fk_poisson.hpp"

using namespace vexsde;

namespace {

PoissonProblem remark1_problem(double c = 1.0) {
    PoissonProblem p;
    p.a = 1.0;
    p.b = 2.0;
    p.c = c;
    p.mu = 1.0;
    p.sigma = 1.0;
    p.p = exponent::remark1();
    p.q = exponent::remark1();
    p.source = source::make_const(1.0);
    return p;
}

// Dense Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
        }
        std::swap(A[k], A[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A[i][k] / A[k][k];
            for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
        x[i] = s / A[i][i];
    }
    return x;
}

double max_error(const FdSolution& s, const std::function<double(double)>& u) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) e = std::max(e, std::abs(s.u[i] - u(s.x[i])));
    return e;
}

}  // namespace

TEST_CASE("Thomas algorithm matches dense elimination", "[fk_poisson][tridiagonal]") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (std::size_t n : {1u, 2u, 5u, 40u}) {
        std::vector<double> lo(n), di(n), up(n), rhs(n);
        std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = U(rng);
            up[i] = U(rng);
            di[i] = 3.0 + U(rng);
            rhs[i] = U(rng);
            A[i][i] = di[i];
            if (i > 0) A[i][i - 1] = lo[i];
            if (i + 1 < n) A[i][i + 1] = up[i];
        }
        const auto u = solve_tridiagonal<double>(lo, di, up, rhs);
        const auto oracle = dense_solve(A, rhs);
        for (std::size_t i = 0; i < n; ++i) CHECK(u[i] == Catch::Approx(oracle[i]).epsilon(1e-12));
        CHECK(tridiagonal_residual<double>(lo, di, up, rhs, u) < 1e-14);
    }
}

TEST_CASE("Thomas algorithm reports singular systems", "[fk_poisson][tridiagonal]") {
    const std::vector<double> lo{0, 1}, di{1, 1}, up{1, 0}, rhs{1, 1};
    try {
        solve_tridiagonal<double>(lo, di, up, rhs);
        FAIL("expected singular-system error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Singular);
    }
    const std::vector<double> short_band{1};
    CHECK_THROWS_AS(solve_tridiagonal<double>(short_band, di, up, rhs), Error);
}

TEST_CASE("problem validation", "[fk_poisson]") {
    auto p = remark1_problem();
    CHECK_NOTHROW(p.validate());
    CHECK(p.lambda() == Catch::Approx(0.5));  // a = 1
    p.a = 0.5;
    CHECK(p.lambda() == Catch::Approx(0.5 * std::pow(0.5, 3.0)));
    p.a = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = remark1_problem();
    p.c = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = remark1_problem();
    p.sigma = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK(std::isfinite(remark1_problem().drift_lipschitz_bound()));
    CHECK_THROWS_AS(fd_solve(remark1_problem(), 8), Error);
}

TEST_CASE("source parsing", "[fk_poisson]") {
    const auto p = remark1_problem();
    CHECK(source::parse("const:2", p)(1.3) == 2.0);
    CHECK(source::parse("poly:1,2,3", p)(2.0) == 17.0);
    CHECK(source::parse("manufactured", p).name == "manufactured");
    CHECK_THROWS_AS(source::parse("exp:1", p), Error);
    CHECK_THROWS_AS(source::parse("const:1,2", p), Error);
}

TEST_CASE("zero source gives the zero solution", "[fk_poisson]") {
    auto p = remark1_problem();
    p.source = source::make_const(0.0);
    const auto fd = fd_solve(p, 64);
    for (double u : fd.u) CHECK(u == 0.0);
    const auto fk = fk_solve(p, 1.5, 1e-3, 200, 1);
    CHECK(fk.value.mean == 0.0);
    CHECK(fk.value.std_error == 0.0);
    const auto cv = cross_validate(p, {1.25, 1.5, 1.75}, 1e-3, 200, 64, 1);
    CHECK(cv.pass);
}

TEST_CASE("quadratic manufactured solution is recovered exactly", "[fk_poisson]") {
    auto p = remark1_problem();
    const auto ms = source::manufactured_quadratic(p);
    p.source = ms.source;
    for (std::size_t n : {16u, 128u, 2048u}) {
        const auto fd = fd_solve(p, n);
        CHECK(max_error(fd, ms.u) < 1e-11);
        CHECK(fd.relative_residual <= 1e-10);
        CHECK(fd.u.front() == 0.0);
        CHECK(fd.u.back() == 0.0);
    }
}

TEST_CASE("finite differences converge at second order", "[fk_poisson]") {
    auto p = remark1_problem();
    const auto ms = source::manufactured_sine(p);
    p.source = ms.source;
    double prev = max_error(fd_solve(p, 32), ms.u);
    for (std::size_t n : {64u, 128u, 256u, 512u}) {
        const double e = max_error(fd_solve(p, n), ms.u);
        INFO("n = " << n);
        CHECK(prev / e >= 3.5);
        CHECK(prev / e <= 4.5);
        prev = e;
    }
}

TEST_CASE("linear interpolation of the grid solution", "[fk_poisson]") {
    FdSolution s;
    s.x = {1.0, 1.5, 2.0};
    s.u = {0.0, 1.0, 0.0};
    CHECK(s.at(1.25) == 0.5);
    CHECK(s.at(1.5) == 1.0);
    CHECK(s.at(1.875) == 0.25);
    CHECK(s.at(0.5) == 0.0);
}

TEST_CASE("Feynman-Kac near the boundary", "[fk_poisson]") {
    const auto p = remark1_problem();
    // The exact value is ~1e-6; what remains is the O(sqrt(dt)) exit bias.
    const auto fk = fk_solve(p, 1.0 + 1e-6, 1e-4, 1000, 1);
    const auto finer = fk_solve(p, 1.0 + 1e-6, 1e-6, 1000, 1);
    const auto mid = fk_solve(p, 1.5, 1e-4, 1000, 1);
    CHECK(fk.value.mean < 0.05 * mid.value.mean);
    CHECK(finer.value.mean < 0.2 * fk.value.mean);
    CHECK(fk.exits_low > fk.exits_high);
    CHECK_THROWS_AS(fk_solve(p, 1.0, 1e-4, 10, 1), Error);
    CHECK_THROWS_AS(fk_solve(p, 2.5, 1e-4, 10, 1), Error);
}

TEST_CASE("Feynman-Kac reproduces the manufactured solution", "[fk_poisson][statistical]") {
    auto p = remark1_problem();
    const auto ms = source::manufactured_quadratic(p);
    p.source = ms.source;
    const auto cv = cross_validate(p, {1.5}, 1e-4, 20000, 256, 42);
    const auto& pc = cv.probes.front();
    const double allowance = 3.0 * pc.fk.value.std_error + pc.c_bias * std::sqrt(1e-4);
    CHECK(std::abs(pc.fk.value.mean - ms.u(1.5)) <= allowance);
    CHECK(pc.fd_value == Catch::Approx(0.25).epsilon(1e-12));
    CHECK(pc.pass);
}

TEST_CASE("exits happen through a or b only", "[fk_poisson][property]") {
    const auto fk = fk_solve(remark1_problem(), 1.3, 1e-3, 2000, 3);
    CHECK(fk.exits_low + fk.exits_high == 2000);
    CHECK(fk.timeouts == 0);
    CHECK(fk.value.mean >= 0.0);
    CHECK(fk.mean_exit_time > 0.0);
    CHECK(fk.max_path_length >= 1);
}

TEST_CASE("unexited paths raise a timeout", "[fk_poisson]") {
    FkOptions opt;
    opt.max_steps = 3;
    try {
        fk_solve(remark1_problem(), 1.5, 1e-6, 10, 1, opt);
        FAIL("expected timeout");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Timeout);
    }
}

TEST_CASE("estimates decrease with the discount rate", "[fk_poisson][property]") {
    for (double x : {1.25, 1.5, 1.75}) {
        const auto undiscounted = fk_solve(remark1_problem(0.0), x, 1e-3, 2000, 9);
        const auto mid = fk_solve(remark1_problem(1.0), x, 1e-3, 2000, 9);
        const auto heavy = fk_solve(remark1_problem(10.0), x, 1e-3, 2000, 9);
        CHECK(undiscounted.value.mean >= mid.value.mean);
        CHECK(mid.value.mean >= heavy.value.mean);
        CHECK(heavy.value.mean >= 0.0);
        // With f == 1 and c == 0 the functional is the exit time itself.
        CHECK(undiscounted.value.mean == Catch::Approx(undiscounted.mean_exit_time).epsilon(1e-12));
    }
}

TEST_CASE("mean exit time is stable under path doubling", "[fk_poisson][property]") {
    const auto p = remark1_problem(0.0);
    const auto a = fk_solve(p, 1.5, 1e-3, 4000, 21);
    const auto b = fk_solve(p, 1.5, 1e-3, 8000, 22);
    // With f == 1, c == 0 the estimate's SE is the exit time's SE.
    CHECK(std::abs(a.mean_exit_time - b.mean_exit_time) <= 3.0 * std::hypot(a.value.std_error, b.value.std_error));
}

TEST_CASE("coupled dt and dt/2 runs share Brownian paths", "[fk_poisson]") {
    // With coarsen = 2 each step sums two fine normals, so a dt run and a dt/2
    // run on one stream stay close path by path.
    const auto p = remark1_problem();
    const auto coarse = fk_solve(p, 1.5, 2e-4, 3000, 5, FkOptions{2});
    const auto fine = fk_solve(p, 1.5, 1e-4, 3000, 5, FkOptions{1});
    const auto indep = fk_solve(p, 1.5, 2e-4, 3000, 6, FkOptions{2});
    CHECK(std::abs(coarse.value.mean - fine.value.mean) < std::abs(coarse.value.mean - indep.value.mean) + 3.0 * coarse.value.std_error);
}

TEST_CASE("Feynman-Kac is thread-count invariant", "[fk_poisson][property]") {
    const auto p = remark1_problem();
    const auto a = fk_solve(p, 1.5, 1e-3, 999, 4, {}, Execution{1});
    const auto b = fk_solve(p, 1.5, 1e-3, 999, 4, {}, Execution{8});
    CHECK(a.value.mean == b.value.mean);
    CHECK(a.value.std_error == b.value.std_error);
    CHECK(a.max_path_length == b.max_path_length);
}
