// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/model.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/rng.hpp"

namespace vexsde {

/// Uniform time grid on [t0, T].
struct PathGrid {
    double t0 = 0.0;
    double T = 1.0;
    std::size_t n_steps = 1;

    double dt() const { return (T - t0) / static_cast<double>(n_steps); }
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt(); }

    /// n_steps = round((T - t0) / dt), at least 1.
    static PathGrid from_dt(double t0, double T, double dt) {
        if (!(dt > 0.0) || !(T > t0)) fail(ErrorKind::Domain, "need T > t0 and dt > 0");
        const double n = std::max(1.0, std::round((T - t0) / dt));
        return PathGrid{t0, T, static_cast<std::size_t>(n)};
    }

    void validate() const {
        if (!(T > t0) || !(t0 >= 0.0) || n_steps < 1) fail(ErrorKind::Domain, "invalid path grid");
    }
};

enum class Scheme { euler, milstein, gbm_exact };

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::euler: return "euler";
        case Scheme::milstein: return "milstein";
        case Scheme::gbm_exact: return "gbm_exact";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view s) {
    if (s == "euler") return Scheme::euler;
    if (s == "milstein") return Scheme::milstein;
    if (s == "gbm_exact") return Scheme::gbm_exact;
    fail(ErrorKind::Config, "unknown scheme '" + std::string(s) + "'");
}

/// States at or below the floor are projected onto it and counted.
inline constexpr double kStateFloor = 1e-12;
inline constexpr double kStateCeiling = 1e300;

struct Path {
    PathGrid grid;
    std::vector<double> values;  // n_steps + 1
    std::vector<double> dW;      // n_steps
    std::size_t projections = 0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
};

/// Brownian increments dW_j = sqrt(dt) Z(seed, path, first + j).
inline void brownian_increments(std::uint64_t seed, std::uint64_t path_index, std::uint64_t first, double dt,
                                std::span<double> out) {
    NormalStream z(seed, path_index);
    const double s = std::sqrt(dt);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = s * z(first + j);
}

namespace detail {

inline void require_scheme(const ModelSpec& m, Scheme scheme) {
    if (scheme == Scheme::gbm_exact && !m.is_gbm()) {
        fail(ErrorKind::SchemeMismatch, "gbm_exact requires p = q = 1 and constant mu, sigma");
    }
}

/// One step from (t, x) with increment dw. Itô convention: coefficients at the
/// left endpoint.
inline double advance(const ModelSpec& m, Scheme scheme, double t, double x, double dt, double dw) {
    switch (scheme) {
        case Scheme::euler:
            return x + m.mu(t) * variable_power(m.p, x) * dt + m.sigma(t) * variable_power(m.q, x) * dw;
        case Scheme::milstein: {
            const double s = m.sigma(t);
            const double b = s * variable_power(m.q, x);
            const double db = s * variable_power_dx(m.q, x);
            return x + m.mu(t) * variable_power(m.p, x) * dt + b * dw + 0.5 * b * db * (dw * dw - dt);
        }
        case Scheme::gbm_exact: {
            const double mu = *m.mu.constant;
            const double s = *m.sigma.constant;
            return x * std::exp((mu - 0.5 * s * s) * dt + s * dw);
        }
    }
    return x;
}

/// Floor projection and overflow guard shared by every stepping routine.
inline double project(double x, std::size_t& projections, std::uint64_t path_index, std::size_t step) {
    if (!(x < kStateCeiling)) {
        fail(ErrorKind::Overflow,
             "state exceeded 1e300 on path " + fmt(path_index) + " at step " + fmt(step));
    }
    if (x <= kStateFloor) {
        ++projections;
        return kStateFloor;
    }
    return x;
}

}  // namespace detail

/// Simulates one path starting from m.x0 at grid.t0. Increment k is drawn
/// from normal number `first_increment + k` of stream (seed, path_index).
inline Path simulate_path(const ModelSpec& m, const PathGrid& grid, Scheme scheme, std::uint64_t seed,
                          std::uint64_t path_index, std::uint64_t first_increment = 0) {
    grid.validate();
    detail::require_scheme(m, scheme);
    Path path;
    path.grid = grid;
    path.seed = seed;
    path.path_index = path_index;
    path.values.resize(grid.n_steps + 1);
    path.dW.resize(grid.n_steps);
    brownian_increments(seed, path_index, first_increment, grid.dt(), path.dW);

    const double dt = grid.dt();
    double x = m.x0;
    path.values[0] = x;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        x = detail::advance(m, scheme, grid.time(k), x, dt, path.dW[k]);
        x = detail::project(x, path.projections, path_index, k);
        path.values[k + 1] = x;
    }
    return path;
}

/// A scalar functional of a simulated path.
struct Observable {
    std::string name;
    std::function<double(const Path&)> eval;
};

namespace observable {

inline Observable terminal() {
    return {"X(T)", [](const Path& p) { return p.values.back(); }};
}

inline Observable terminal_power(double m) {
    return {"X(T)^" + fmt(m), [m](const Path& p) { return std::pow(p.values.back(), m); }};
}

inline Observable sup_abs() {
    return {"sup|X|", [](const Path& p) {
                double s = 0.0;
                for (double v : p.values) s = std::max(s, std::abs(v));
                return s;
            }};
}

/// Trapezoidal integral of X^2 over the grid.
inline double integral_square(const PathGrid& grid, std::span<const double> values) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        acc += 0.5 * (values[k] * values[k] + values[k + 1] * values[k + 1]);
    }
    return acc * grid.dt();
}

inline Observable integral_sq() {
    return {"int X^2 dt", [](const Path& p) { return integral_square(p.grid, p.values); }};
}

inline Observable constant(double v) {
    return {"const", [v](const Path&) { return v; }};
}

inline Observable projections() {
    return {"projections", [](const Path& p) { return static_cast<double>(p.projections); }};
}

inline Observable parse(std::string_view name) {
    if (name == "terminal") return terminal();
    if (name == "sup_abs") return sup_abs();
    if (name == "int_sq") return integral_sq();
    if (name == "one") return constant(1.0);
    if (name == "projections") return projections();
    if (name.rfind("terminal_pow:", 0) == 0) {
        return terminal_power(exponent::parse_number(name.substr(13), name));
    }
    fail(ErrorKind::Config, "unknown observable '" + std::string(name) + "'");
}

}  // namespace observable

/// Per-path values for every observable, laid out [observable][path].
inline std::vector<std::vector<double>> simulate_values(const ModelSpec& m, const PathGrid& grid, Scheme scheme,
                                                        std::uint64_t seed, std::size_t n_paths,
                                                        const std::vector<Observable>& observables,
                                                        const Execution& exec = {}) {
    detail::require_scheme(m, scheme);
    std::vector<std::vector<double>> values(observables.size(), std::vector<double>(n_paths));
    parallel_for(n_paths, exec, [&](std::size_t i) {
        try {
            const Path path = simulate_path(m, grid, scheme, seed, i);
            for (std::size_t o = 0; o < observables.size(); ++o) values[o][i] = observables[o].eval(path);
        } catch (const Error& e) {
            throw Error(e.kind(), "path_index " + fmt(i) + ": " + e.reason());
        }
    });
    return values;
}

/// Averages each observable over n_paths paths, reduced in path_index order.
inline std::vector<McEstimate> simulate_batch(const ModelSpec& m, const PathGrid& grid, Scheme scheme,
                                              std::uint64_t seed, std::size_t n_paths,
                                              const std::vector<Observable>& observables,
                                              const Execution& exec = {}) {
    if (n_paths < 2) fail(ErrorKind::Domain, "simulate_batch needs at least 2 paths");
    const auto values = simulate_values(m, grid, scheme, seed, n_paths, observables, exec);
    std::vector<McEstimate> out;
    out.reserve(observables.size());
    for (std::size_t o = 0; o < observables.size(); ++o) {
        out.push_back(summarize(values[o], observables[o].name, seed));
    }
    return out;
}

}  // namespace vexsde
