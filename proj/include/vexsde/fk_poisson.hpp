// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/exponents.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/rng.hpp"
#include "vexsde/tridiagonal.hpp"

namespace vexsde {

struct SourceFunction {
    std::string name;
    std::function<double(double)> f;
    double operator()(double x) const { return f(x); }
};

/// Dirichlet problem on (a, b), 0 < a < b:
///   1/2 sigma^2 x^{2q(x)} u'' + mu x^{p(x)} u' - c u = -f,  u(a) = u(b) = 0.
struct PoissonProblem {
    double a = 1.0;
    double b = 2.0;
    double c = 0.0;
    double mu = 1.0;
    double sigma = 1.0;
    ExponentFunction p;
    ExponentFunction q;
    SourceFunction source;

    /// 1/2 sigma^2 x^{2q(x)}
    double diffusivity(double x) const { return 0.5 * sigma * sigma * std::pow(x, 2.0 * q.h(x)); }
    /// mu x^{p(x)}
    double velocity(double x) const { return mu * std::pow(x, p.h(x)); }

    /// Ellipticity constant 1/2 sigma^2 min{a^{2q-}, a^{2q+}}.
    double lambda() const {
        return 0.5 * sigma * sigma * std::min(std::pow(a, 2.0 * q.h_minus), std::pow(a, 2.0 * q.h_plus));
    }

    /// Bound on |d/dx x^{p(x)}| over [a, b] from the class-S constants.
    /// Informational; neither solver uses it.
    double drift_lipschitz_bound() const {
        return std::max(std::pow(b, p.h_minus), std::pow(b, p.h_plus)) *
               ((p.M0 + p.C0 * std::pow(a, -(1.0 + p.alpha))) * std::log(b) + p.h_plus / a);
    }

    void validate() const {
        if (!(a > 0.0 && b > a && std::isfinite(b))) fail(ErrorKind::Domain, "need 0 < a < b < inf");
        if (!(c >= 0.0)) fail(ErrorKind::Domain, "discount c must be >= 0");
        if (!(mu > 0.0) || !(sigma > 0.0)) fail(ErrorKind::Domain, "mu and sigma must be positive");
        if (!(lambda() > 0.0)) fail(ErrorKind::Domain, "operator is not uniformly elliptic");
        if (!source.f) fail(ErrorKind::Domain, "no source function");
    }
};

/// u* and the source that makes it exact: f = -(L u* - c u*).
struct ManufacturedSolution {
    std::function<double(double)> u;
    SourceFunction source;
};

namespace source {

inline SourceFunction make_const(double v) {
    return {"const:" + fmt(v), [v](double) { return v; }};
}

/// Coefficients in increasing degree: c0 + c1 x + c2 x^2 + ...
inline SourceFunction make_poly(std::vector<double> coeffs) {
    std::string name = "poly:";
    for (std::size_t i = 0; i < coeffs.size(); ++i) name += (i ? "," : "") + fmt(coeffs[i]);
    return {name, [coeffs = std::move(coeffs)](double x) {
                double acc = 0.0;
                for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
                return acc;
            }};
}

/// u*(x) = (x - a)(b - x).
inline ManufacturedSolution manufactured_quadratic(const PoissonProblem& prob) {
    const double a = prob.a, b = prob.b;
    ManufacturedSolution ms;
    ms.u = [a, b](double x) { return (x - a) * (b - x); };
    ms.source = {"manufactured", [prob, a, b](double x) {
                     const double u = (x - a) * (b - x);
                     const double du = (a + b) - 2.0 * x;
                     return -(prob.diffusivity(x) * -2.0 + prob.velocity(x) * du - prob.c * u);
                 }};
    return ms;
}

/// u*(x) = sin(pi (x - a) / (b - a)); not reproduced exactly by central
/// differences, so it exposes the second-order truncation error.
inline ManufacturedSolution manufactured_sine(const PoissonProblem& prob) {
    const double a = prob.a;
    const double k = std::numbers::pi / (prob.b - prob.a);
    ManufacturedSolution ms;
    ms.u = [a, k](double x) { return std::sin(k * (x - a)); };
    ms.source = {"manufactured_sine", [prob, a, k](double x) {
                     const double s = std::sin(k * (x - a));
                     const double du = k * std::cos(k * (x - a));
                     const double d2u = -k * k * s;
                     return -(prob.diffusivity(x) * d2u + prob.velocity(x) * du - prob.c * s);
                 }};
    return ms;
}

/// "const:<v>", "poly:<c0>,<c1>,...", "manufactured", "manufactured_sine".
inline SourceFunction parse(std::string_view spec, const PoissonProblem& prob) {
    if (spec == "manufactured") return manufactured_quadratic(prob).source;
    if (spec == "manufactured_sine") return manufactured_sine(prob).source;
    const auto colon = spec.find(':');
    if (colon != std::string_view::npos) {
        const auto kind = spec.substr(0, colon);
        std::vector<double> args;
        std::string_view rest = spec.substr(colon + 1);
        while (true) {
            const auto comma = rest.find(',');
            args.push_back(exponent::parse_number(rest.substr(0, comma), spec));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (kind == "const" && args.size() == 1) return make_const(args[0]);
        if (kind == "poly") return make_poly(std::move(args));
    }
    fail(ErrorKind::Config, "unknown source function '" + std::string(spec) + "'");
}

}  // namespace source

struct FdSolution {
    std::vector<double> x;  // n_grid + 1 nodes including both boundaries
    std::vector<double> u;
    double residual = 0.0;           // max |A u - rhs| over interior rows
    double relative_residual = 0.0;  // residual / (|A|_inf |u|_inf + |rhs|_inf)

    /// Linear interpolation between nodes.
    double at(double xp) const {
        if (xp <= x.front()) return u.front();
        if (xp >= x.back()) return u.back();
        const double h = x[1] - x[0];
        auto i = static_cast<std::size_t>((xp - x.front()) / h);
        i = std::min(i, x.size() - 2);
        const double w = (xp - x[i]) / (x[i + 1] - x[i]);
        return (1.0 - w) * u[i] + w * u[i + 1];
    }
};

/// Second-order central differences on n_grid + 1 uniform nodes.
inline FdSolution fd_solve(const PoissonProblem& prob, std::size_t n_grid) {
    prob.validate();
    if (n_grid < 16) fail(ErrorKind::Domain, "fd_solve needs n_grid >= 16");
    const double h = (prob.b - prob.a) / static_cast<double>(n_grid);
    const std::size_t m = n_grid - 1;
    std::vector<double> lower(m), diag(m), upper(m), rhs(m);
    FdSolution sol;
    sol.x.resize(n_grid + 1);
    for (std::size_t i = 0; i <= n_grid; ++i) sol.x[i] = prob.a + static_cast<double>(i) * h;
    sol.x.back() = prob.b;
    double row_norm = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        const double x = sol.x[r + 1];
        const double d = prob.diffusivity(x) / (h * h);
        const double v = prob.velocity(x) / (2.0 * h);
        lower[r] = d - v;
        diag[r] = -2.0 * d - prob.c;
        upper[r] = d + v;
        rhs[r] = -prob.source(x);
        row_norm = std::max(row_norm, std::abs(lower[r]) + std::abs(diag[r]) + std::abs(upper[r]));
    }
    const auto u = solve_tridiagonal<double>(lower, diag, upper, rhs);
    sol.u.assign(n_grid + 1, 0.0);
    std::copy(u.begin(), u.end(), sol.u.begin() + 1);
    sol.residual = tridiagonal_residual<double>(lower, diag, upper, rhs, u);
    double u_inf = 0.0, rhs_inf = 0.0;
    for (double v : u) u_inf = std::max(u_inf, std::abs(v));
    for (double v : rhs) rhs_inf = std::max(rhs_inf, std::abs(v));
    const double scale = row_norm * u_inf + rhs_inf;
    sol.relative_residual = scale > 0.0 ? sol.residual / scale : 0.0;
    return sol;
}

struct FkOptions {
    /// Normals are indexed at dt / coarsen; each step sums `coarsen` of them.
    /// coarsen = 2 couples a dt run with a dt/2 run on the same Brownian path.
    unsigned coarsen = 1;
    std::uint64_t max_steps = 1'000'000'000;
};

struct FkEstimate {
    McEstimate value;
    double probe = 0.0;
    double dt = 0.0;
    double mean_exit_time = 0.0;
    std::uint64_t max_path_length = 0;
    std::size_t exits_low = 0;   // through a
    std::size_t exits_high = 0;  // through b
    std::size_t timeouts = 0;
};

/// u(x) = E^x[ int_0^tau e^{-cs} f(X(s)) ds ] by Euler paths of
/// dX = mu X^p dt + sigma X^q dW run until the first grid point outside (a, b).
inline FkEstimate fk_solve(const PoissonProblem& prob, double x, double dt, std::size_t n_paths, std::uint64_t seed,
                           const FkOptions& opt = {}, const Execution& exec = {}) {
    prob.validate();
    if (!(x > prob.a && x < prob.b)) fail(ErrorKind::Domain, "probe must lie inside (a, b)");
    if (!(dt > 0.0) || n_paths < 1 || opt.coarsen < 1) fail(ErrorKind::Domain, "invalid Feynman-Kac run parameters");
    std::vector<double> integral(n_paths), exit_time(n_paths);
    std::vector<std::uint64_t> steps(n_paths);
    std::vector<unsigned char> side(n_paths);  // 0 low, 1 high, 2 timeout
    const double sqrt_dt = std::sqrt(dt);
    const double step_discount = std::exp(-prob.c * dt);
    parallel_for(n_paths, exec, [&](std::size_t i) {
        NormalStream z(seed, i);
        double X = x;
        double acc = 0.0;
        double disc = 1.0;
        std::uint64_t k = 0;
        while (X > prob.a && X < prob.b) {
            if (k >= opt.max_steps) break;
            acc += disc * prob.source(X) * dt;
            const double lx = std::log(X);
            const double dw = sqrt_dt * z.aggregated(k * opt.coarsen, opt.coarsen);
            X += prob.mu * std::exp(prob.p.h(X) * lx) * dt + prob.sigma * std::exp(prob.q.h(X) * lx) * dw;
            disc *= step_discount;
            ++k;
        }
        integral[i] = acc;
        steps[i] = k;
        exit_time[i] = static_cast<double>(k) * dt;
        side[i] = X <= prob.a ? 0 : (X >= prob.b ? 1 : 2);
    });
    FkEstimate est;
    est.probe = x;
    est.dt = dt;
    est.value = summarize(integral, "u(" + fmt(x) + ")", seed);
    est.mean_exit_time = summarize(exit_time).mean;
    for (std::size_t i = 0; i < n_paths; ++i) {
        est.max_path_length = std::max(est.max_path_length, steps[i]);
        if (side[i] == 0) ++est.exits_low;
        else if (side[i] == 1) ++est.exits_high;
        else ++est.timeouts;
    }
    if (est.timeouts > 0) {
        fail(ErrorKind::Timeout, fmt(est.timeouts) + " path(s) did not exit within " +
                                     fmt(opt.max_steps) + " steps");
    }
    return est;
}

struct ProbeComparison {
    double probe = 0.0;
    FkEstimate fk;       // at dt
    FkEstimate fk_half;  // at dt/2 on the same Brownian paths
    double c_bias = 0.0;
    double allowance = 0.0;  // 3 SE + c_bias sqrt(dt)
    double fd_value = 0.0;
    double diff = 0.0;
    bool pass = false;
};

struct CrossValidationReport {
    std::vector<ProbeComparison> probes;
    FdSolution fd;
    double dt = 0.0;
    double dt_heuristic = 0.0;  // (b - a)^2 / (100 sigma^2)
    double lambda = 0.0;
    double drift_lipschitz_bound = 0.0;
    bool pass = false;
};

/// Compares the Feynman-Kac estimate with the finite-difference solution at
/// each probe. Pass iff |fk - fd| <= 3 SE + C_bias sqrt(dt), where C_bias is
/// calibrated from a coupled dt/2 run: C_bias = |fk(dt) - fk(dt/2)| / (sqrt(dt) - sqrt(dt/2)).
inline CrossValidationReport cross_validate(const PoissonProblem& prob, const std::vector<double>& probes, double dt,
                                            std::size_t n_paths, std::size_t n_grid, std::uint64_t seed,
                                            const Execution& exec = {}) {
    CrossValidationReport rep;
    rep.fd = fd_solve(prob, n_grid);
    rep.dt = dt;
    rep.dt_heuristic = (prob.b - prob.a) * (prob.b - prob.a) / (100.0 * prob.sigma * prob.sigma);
    rep.lambda = prob.lambda();
    rep.drift_lipschitz_bound = prob.drift_lipschitz_bound();
    rep.pass = true;
    for (double x : probes) {
        ProbeComparison pc;
        pc.probe = x;
        pc.fk_half = fk_solve(prob, x, 0.5 * dt, n_paths, seed, FkOptions{1}, exec);
        pc.fk = fk_solve(prob, x, dt, n_paths, seed, FkOptions{2}, exec);
        const double gap = std::sqrt(dt) - std::sqrt(0.5 * dt);
        pc.c_bias = std::abs(pc.fk.value.mean - pc.fk_half.value.mean) / gap;
        pc.allowance = 3.0 * pc.fk.value.std_error + pc.c_bias * std::sqrt(dt);
        pc.fd_value = rep.fd.at(x);
        pc.diff = std::abs(pc.fk.value.mean - pc.fd_value);
        pc.pass = pc.diff <= pc.allowance;
        rep.pass = rep.pass && pc.pass;
        rep.probes.push_back(std::move(pc));
    }
    return rep;
}

}  // namespace vexsde
