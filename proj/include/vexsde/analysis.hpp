// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/model.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/simulate.hpp"

namespace vexsde {

/// Bound values above this are reported as vacuous rather than compared.
inline constexpr double kVacuousBound = 1e300;

/// Linear-interpolated quantile (numpy's default "linear" method).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// E[X^m(t)] <= (3^{m-1} E[x0^2] + (t - t0)(A + B)) e^{t(A + B)} with
///   A = 6^{m-1} (mu+)^m (t - t0)^{m-1} K^m,
///   B = 6^{m-1} (sigma+)^m (m(m-1)/2)^{m/2} (t - t0)^{(m-2)/2} K^m.
struct MomentBound {
    double m = 2.0;
    double t0 = 0.0;
    double mu_plus = 0.0;
    double sigma_plus = 0.0;
    double K = 1.0;
    double x0_moment = 1.0;  // E[x0^2] as written, or E[x0^m] under the sensitivity flag

    double A(double t) const {
        return std::pow(6.0, m - 1.0) * std::pow(mu_plus, m) * std::pow(t - t0, m - 1.0) * std::pow(K, m);
    }
    double B(double t) const {
        return std::pow(6.0, m - 1.0) * std::pow(sigma_plus, m) * std::pow(m * (m - 1.0) / 2.0, m / 2.0) *
               std::pow(t - t0, (m - 2.0) / 2.0) * std::pow(K, m);
    }
    double operator()(double t) const {
        const double ab = A(t) + B(t);
        return (std::pow(3.0, m - 1.0) * x0_moment + (t - t0) * ab) * std::exp(t * ab);
    }
};

inline MomentBound moment_bound(const ModelSpec& model, double m, bool use_x0_m = false) {
    if (!(m >= 2.0)) fail(ErrorKind::Domain, "moment order must be >= 2");
    MomentBound b;
    b.m = m;
    b.t0 = model.t0;
    b.mu_plus = model.mu.f_plus;
    b.sigma_plus = model.sigma.f_plus;
    b.K = model.K;
    b.x0_moment = use_x0_m ? std::pow(model.x0, m) : model.x0 * model.x0;
    return b;
}

struct MomentReport {
    double m = 2.0;
    bool x0_m = false;
    std::vector<double> t;
    std::vector<double> empirical;
    std::vector<double> std_error;
    std::vector<double> bound;  // +inf where vacuous
    std::vector<bool> vacuous;
    bool pass = false;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

struct MomentOptions {
    std::size_t checkpoints = 10;
    bool use_x0_m = false;
    Scheme scheme = Scheme::euler;
};

/// Shared simulation for several moment orders: per-path states at evenly
/// spaced checkpoints (t0 included).
inline std::vector<MomentReport> verify_moment_bounds(const ModelSpec& model, const std::vector<double>& orders,
                                                      const PathGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                                      const MomentOptions& opt = {}, const Execution& exec = {}) {
    if (n_paths < 2) fail(ErrorKind::Domain, "need at least 2 paths");
    const std::size_t n_cp = std::max<std::size_t>(1, std::min(opt.checkpoints, grid.n_steps));
    std::vector<std::size_t> idx(n_cp + 1);
    for (std::size_t j = 0; j <= n_cp; ++j) {
        idx[j] = static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(grid.n_steps) /
                                                       static_cast<double>(n_cp)));
    }
    std::vector<double> states((n_cp + 1) * n_paths);
    parallel_for(n_paths, exec, [&](std::size_t i) {
        const Path path = simulate_path(model, grid, opt.scheme, seed, i);
        for (std::size_t j = 0; j <= n_cp; ++j) states[j * n_paths + i] = path.values[idx[j]];
    });

    std::vector<MomentReport> reports;
    for (double m : orders) {
        const auto bound = moment_bound(model, m, opt.use_x0_m);
        MomentReport r;
        r.m = m;
        r.x0_m = opt.use_x0_m;
        r.n_paths = n_paths;
        r.seed = seed;
        r.pass = true;
        std::vector<double> powered(n_paths);
        for (std::size_t j = 0; j <= n_cp; ++j) {
            for (std::size_t i = 0; i < n_paths; ++i) powered[i] = std::pow(states[j * n_paths + i], m);
            const auto est = summarize(powered);
            const double t = grid.time(idx[j]);
            double b = bound(t);
            const bool vac = !(b <= kVacuousBound);
            if (vac) b = std::numeric_limits<double>::infinity();
            r.t.push_back(t);
            r.empirical.push_back(est.mean);
            r.std_error.push_back(est.std_error);
            r.bound.push_back(b);
            r.vacuous.push_back(vac);
            if (!vac && !(est.mean - 3.0 * est.std_error <= b)) r.pass = false;
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

inline MomentReport verify_moment_bound(const ModelSpec& model, double m, const PathGrid& grid, std::uint64_t seed,
                                        std::size_t n_paths, const MomentOptions& opt = {},
                                        const Execution& exec = {}) {
    return verify_moment_bounds(model, {m}, grid, seed, n_paths, opt, exec).front();
}

/// K_hat = 4 max{K^2 (sigma+)^2, K mu+}.
inline double asymptotic_bound(const ModelSpec& model) {
    const double s = model.sigma.f_plus;
    return 4.0 * std::max(model.K * model.K * s * s, model.K * model.mu.f_plus);
}

struct AsymptoticReport {
    double T_long = 0.0;
    double K_hat = 0.0;
    std::vector<double> sup_rate;       // per path sup_{t >= T_long/2} (1/t) log X(t)
    std::vector<double> terminal_rate;  // per path (1/T_long) log X(T_long)
    double p01 = 0.0, p50 = 0.0, p99 = 0.0;
    double terminal_median = 0.0;
    bool pass = false;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// Finite-horizon proxy for limsup (1/t) log X(t) <= K_hat: the 99th
/// percentile of the per-path sup over [T_long/2, T_long].
inline AsymptoticReport verify_asymptotic(const ModelSpec& model, double T_long, double dt, std::uint64_t seed,
                                          std::size_t n_paths, Scheme scheme = Scheme::euler,
                                          const Execution& exec = {}) {
    if (!(T_long >= 10.0)) fail(ErrorKind::Domain, "asymptotic horizon must be at least 10");
    if (model.T < T_long) fail(ErrorKind::Domain, "model horizon shorter than T_long");
    const PathGrid grid = PathGrid::from_dt(model.t0, T_long, dt);
    AsymptoticReport r;
    r.T_long = T_long;
    r.K_hat = asymptotic_bound(model);
    r.n_paths = n_paths;
    r.seed = seed;
    r.sup_rate.resize(n_paths);
    r.terminal_rate.resize(n_paths);
    parallel_for(n_paths, exec, [&](std::size_t i) {
        const Path path = simulate_path(model, grid, scheme, seed, i);
        double s = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= grid.n_steps; ++k) {
            const double t = grid.time(k);
            if (t >= 0.5 * T_long && t > 0.0) s = std::max(s, std::log(path.values[k]) / t);
        }
        r.sup_rate[i] = s;
        r.terminal_rate[i] = std::log(path.values.back()) / grid.T;
    });
    r.p01 = quantile(r.sup_rate, 0.01);
    r.p50 = quantile(r.sup_rate, 0.50);
    r.p99 = quantile(r.sup_rate, 0.99);
    r.terminal_median = quantile(r.terminal_rate, 0.5);
    r.pass = r.p99 <= r.K_hat;
    return r;
}

/// E[sup_{s<=t} |X_xi - X_eta|^m] <= 3^{m-1} e^{T Lbar} |xi - eta|^m with
///   Lbar = 3^{m-1} L^m ((mu+)^m t^{m-1} + C_m (sigma+)^m t^{(m-2)/2}),
/// C_m = (m(m-1)/2)^{m/2}.
struct StabilityBound {
    double m = 2.0;
    double L = 0.0;
    double mu_plus = 0.0;
    double sigma_plus = 0.0;
    double t = 1.0;
    double T = 1.0;

    double C_m() const { return std::pow(m * (m - 1.0) / 2.0, m / 2.0); }
    double L_bar() const {
        return std::pow(3.0, m - 1.0) * std::pow(L, m) *
               (std::pow(mu_plus, m) * std::pow(t, m - 1.0) +
                C_m() * std::pow(sigma_plus, m) * std::pow(t, (m - 2.0) / 2.0));
    }
    double factor() const { return std::pow(3.0, m - 1.0) * std::exp(T * L_bar()); }
};

inline StabilityBound stability_bound(const ModelSpec& model, double m, double horizon) {
    if (!(m >= 2.0)) fail(ErrorKind::Domain, "stability order must be >= 2");
    return StabilityBound{m, model.L, model.mu.f_plus, model.sigma.f_plus, horizon, horizon};
}

struct StabilityReport {
    double m = 2.0;
    double xi = 1.0;
    double eta = 1.0;
    StabilityBound constants;
    McEstimate empirical;  // E[sup |X_xi - X_eta|^m]
    double bound = 0.0;
    double ratio = 0.0;  // empirical / bound
    bool pass = false;
    McEstimate halved;  // same with |xi - eta| halved
    double scaling = std::numeric_limits<double>::quiet_NaN();  // empirical / halved
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    bool scaling_ok = true;
};

/// Per-path sup over the grid of |X_xi - X_eta|^m, both paths driven by the
/// same increments.
inline std::vector<double> coupled_sup_differences(const ModelSpec& model, double m, double xi, double eta,
                                                   const PathGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                                   Scheme scheme = Scheme::euler, const Execution& exec = {}) {
    const ModelSpec a = model.with_x0(xi);
    const ModelSpec b = model.with_x0(eta);
    std::vector<double> out(n_paths);
    parallel_for(n_paths, exec, [&](std::size_t i) {
        const Path pa = simulate_path(a, grid, scheme, seed, i);
        const Path pb = simulate_path(b, grid, scheme, seed, i);
        double s = 0.0;
        for (std::size_t k = 0; k < pa.values.size(); ++k) s = std::max(s, std::abs(pa.values[k] - pb.values[k]));
        out[i] = std::pow(s, m);
    });
    return out;
}

inline StabilityReport verify_stability(const ModelSpec& model, double m, double xi, double eta,
                                        const PathGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                        Scheme scheme = Scheme::euler, const Execution& exec = {}) {
    if (!(xi > 0.0) || !(eta > 0.0)) fail(ErrorKind::Domain, "stability starts must be positive");
    StabilityReport r;
    r.m = m;
    r.xi = xi;
    r.eta = eta;
    r.constants = stability_bound(model, m, grid.T - grid.t0);
    r.empirical = summarize(coupled_sup_differences(model, m, xi, eta, grid, seed, n_paths, scheme, exec),
                            "E[sup|dX|^m]", seed);
    r.bound = r.constants.factor() * std::pow(std::abs(xi - eta), m);
    r.ratio = r.bound > 0.0 ? r.empirical.mean / r.bound : 0.0;
    r.pass = r.empirical.mean - 3.0 * r.empirical.std_error <= r.bound;
    if (xi != eta) {
        const double eta_half = xi + 0.5 * (eta - xi);
        r.halved = summarize(coupled_sup_differences(model, m, xi, eta_half, grid, seed, n_paths, scheme, exec),
                             "E[sup|dX|^m] (halved)", seed);
        r.scaling = r.empirical.mean / r.halved.mean;
        r.fitted_exponent = std::log2(r.scaling);
        r.scaling_ok = std::abs(r.fitted_exponent - m) <= 0.3;
    }
    return r;
}

}  // namespace vexsde
