// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/model.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/simulate.hpp"

namespace vexsde {

/// Interval splitting for the Picard map: c(tau) = sqrt(2 L^2 tau (tau mu+^2 + sigma+^2))
/// and the largest tau with c(tau) <= c_target.
struct ContractionPlan {
    double L = 0.0;
    double mu_plus = 0.0;
    double sigma_plus = 0.0;
    double c_target = 0.5;
    double T_star = 0.0;
    std::size_t n_intervals = 1;
    double interval_length = 0.0;  // (T - t0) / n_intervals <= T_star
    std::string formula = "c(tau) = sqrt(2 L^2 tau (tau mu+^2 + sigma+^2)), tau = subinterval length";

    double c(double tau) const {
        return std::sqrt(2.0 * L * L * tau * (tau * mu_plus * mu_plus + sigma_plus * sigma_plus));
    }
};

inline ContractionPlan make_contraction_plan(double L, double mu_plus, double sigma_plus, double t0, double T,
                                             double c_target = 0.5) {
    if (!(c_target > 0.0 && c_target < 1.0)) fail(ErrorKind::Plan, "contraction target must lie in (0, 1)");
    if (!(T > t0)) fail(ErrorKind::Plan, "empty horizon");
    ContractionPlan plan;
    plan.L = L;
    plan.mu_plus = mu_plus;
    plan.sigma_plus = sigma_plus;
    plan.c_target = c_target;
    // c(tau)^2 = a tau^2 + b tau with a = 2 L^2 mu^2, b = 2 L^2 sigma^2.
    const double a = 2.0 * L * L * mu_plus * mu_plus;
    const double b = 2.0 * L * L * sigma_plus * sigma_plus;
    const double c2 = c_target * c_target;
    double tau = std::numeric_limits<double>::infinity();
    if (a > 0.0) {
        tau = 2.0 * c2 / (b + std::sqrt(b * b + 4.0 * a * c2));
    } else if (b > 0.0) {
        tau = c2 / b;
    }
    plan.T_star = tau;
    const double span = T - t0;
    plan.n_intervals = std::isfinite(tau) ? static_cast<std::size_t>(std::max(1.0, std::ceil(span / tau - 1e-12)))
                                          : std::size_t{1};
    plan.interval_length = span / static_cast<double>(plan.n_intervals);
    return plan;
}

inline ContractionPlan make_contraction_plan(const ModelSpec& m, double t0, double T, double c_target = 0.5) {
    return make_contraction_plan(m.L, m.mu_plus_bar(), m.sigma_plus_bar(), t0, T, c_target);
}

/// n_paths discretized paths on a shared grid, row-major.
struct Ensemble {
    PathGrid grid;
    std::size_t n_paths = 0;
    std::vector<double> start;   // per-path initial state
    std::vector<double> values;  // n_paths x (n_steps + 1)
    std::size_t projections = 0;

    std::size_t width() const { return grid.n_steps + 1; }
    std::span<double> row(std::size_t i) { return {values.data() + i * width(), width()}; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * width(), width()}; }

    /// X(t) == scale * start for every t.
    static Ensemble constant(const PathGrid& grid, std::vector<double> start, double scale = 1.0) {
        Ensemble e;
        e.grid = grid;
        e.n_paths = start.size();
        e.values.resize(e.n_paths * e.width());
        for (std::size_t i = 0; i < e.n_paths; ++i) {
            std::fill_n(e.values.begin() + static_cast<std::ptrdiff_t>(i * e.width()), e.width(), scale * start[i]);
        }
        e.start = std::move(start);
        return e;
    }
};

/// Brownian increments shared by every Picard iterate, n_paths x n_steps.
struct Increments {
    PathGrid grid;
    std::size_t n_paths = 0;
    std::vector<double> dW;

    std::span<const double> row(std::size_t i) const { return {dW.data() + i * grid.n_steps, grid.n_steps}; }

    static Increments draw(const PathGrid& grid, std::uint64_t seed, std::size_t n_paths,
                           std::uint64_t first_increment = 0) {
        Increments inc;
        inc.grid = grid;
        inc.n_paths = n_paths;
        inc.dW.resize(n_paths * grid.n_steps);
        for (std::size_t i = 0; i < n_paths; ++i) {
            brownian_increments(seed, i, first_increment, grid.dt(),
                                {inc.dW.data() + i * grid.n_steps, grid.n_steps});
        }
        return inc;
    }
};

namespace detail {
inline void require_same_shape(const Ensemble& x, const Increments& dw) {
    if (x.grid.n_steps != dw.grid.n_steps || x.grid.t0 != dw.grid.t0 || x.grid.T != dw.grid.T ||
        x.n_paths != dw.n_paths || x.start.size() != x.n_paths) {
        fail(ErrorKind::Shape, "ensemble and increments disagree on grid or path count");
    }
}
}  // namespace detail

/// (Phi X)(t_k) = X(t0) + sum_{j<k} mu(t_j) X_j^{p(X_j)} dt + sum_{j<k} sigma(t_j) X_j^{q(X_j)} dW_j,
/// per path; output values are floor-projected like simulate_path.
inline Ensemble phi_apply(const ModelSpec& m, const Ensemble& x, const Increments& dw, const Execution& exec = {}) {
    detail::require_same_shape(x, dw);
    Ensemble out;
    out.grid = x.grid;
    out.n_paths = x.n_paths;
    out.start = x.start;
    out.values.resize(x.values.size());
    const double dt = x.grid.dt();
    const std::size_t n = x.grid.n_steps;
    std::vector<std::size_t> proj(x.n_paths, 0);
    parallel_for(x.n_paths, exec, [&](std::size_t i) {
        const auto in = x.row(i);
        const auto inc = dw.row(i);
        auto dst = out.row(i);
        double acc = x.start[i];
        dst[0] = acc;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = x.grid.time(k);
            const double xk = in[k];
            acc = acc + m.mu(t) * variable_power(m.p, xk) * dt + m.sigma(t) * variable_power(m.q, xk) * inc[k];
            dst[k + 1] = detail::project(acc, proj[i], i, k);
        }
    });
    for (auto c : proj) out.projections += c;
    return out;
}

/// Monte Carlo estimate of ||X - Y||_T = sqrt(E int (X - Y)^2 dt), trapezoidal in time.
struct NormEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::vector<double> per_path;  // int (X - Y)^2 dt per path
};

inline NormEstimate norm_T(const Ensemble& x, const Ensemble& y) {
    if (x.n_paths != y.n_paths || x.grid.n_steps != y.grid.n_steps) {
        fail(ErrorKind::Shape, "ensembles disagree on grid or path count");
    }
    NormEstimate est;
    est.per_path.resize(x.n_paths);
    std::vector<double> diff(x.width());
    for (std::size_t i = 0; i < x.n_paths; ++i) {
        const auto a = x.row(i);
        const auto b = y.row(i);
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a[k] - b[k];
        est.per_path[i] = observable::integral_square(x.grid, diff);
    }
    const auto s = summarize(est.per_path);
    est.value = std::sqrt(s.mean);
    est.std_error = est.value > 0.0 ? s.std_error / (2.0 * est.value) : 0.0;
    return est;
}

/// ||X||_T itself.
inline double norm_T(const Ensemble& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.n_paths; ++i) acc += observable::integral_square(x.grid, x.row(i));
    return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(x.n_paths, 1)));
}

/// Ratio ||a|| / ||b|| of two norm estimates on the same paths, with a
/// delta-method standard error.
inline std::pair<double, double> norm_ratio(const NormEstimate& num, const NormEstimate& den) {
    if (!(den.value > 0.0)) return {0.0, 0.0};
    const double r = num.value / den.value;
    const double r2 = r * r;
    const double b_mean = den.value * den.value;
    std::vector<double> resid(num.per_path.size());
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = num.per_path[i] - r2 * den.per_path[i];
    const double se_r2 = summarize(resid).std_error / b_mean;
    return {r, r > 0.0 ? se_r2 / (2.0 * r) : 0.0};
}

struct IterationRecord {
    std::size_t iteration = 0;  // n, for ||X_n - X_{n-1}||
    double norm = 0.0;
    double norm_se = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double ratio_se = 0.0;
    bool at_roundoff = false;  // norm indistinguishable from floating-point noise
};

struct FixedPointResult {
    Ensemble solution;
    std::vector<IterationRecord> log;
    bool converged = false;
    double c = 0.0;  // c(tau) for this grid
};

struct FixedPointOptions {
    double tol = 1e-6;
    std::size_t max_iter = 50;
    double initial_scale = 1.0;  // X_0 == initial_scale * start
    double c_target = 0.5;
    bool enforce_plan = true;
};

/// Iterates X_{n+1} = Phi X_n from X_0 == start until ||X_{n+1} - X_n||_T < tol.
inline FixedPointResult solve_fixed_point(const ModelSpec& m, const Increments& dw, std::vector<double> start,
                                          const FixedPointOptions& opt = {}, const Execution& exec = {}) {
    const auto plan = make_contraction_plan(m, dw.grid.t0, dw.grid.T, opt.c_target);
    const double tau = dw.grid.T - dw.grid.t0;
    if (opt.enforce_plan && tau > plan.T_star * (1.0 + 1e-12)) {
        fail(ErrorKind::Plan, "interval length " + fmt(tau) + " exceeds T* = " + fmt(plan.T_star));
    }
    FixedPointResult res;
    res.c = plan.c(tau);
    Ensemble current = Ensemble::constant(dw.grid, std::move(start), opt.initial_scale);
    NormEstimate previous;
    for (std::size_t n = 1; n <= std::max<std::size_t>(opt.max_iter, 1); ++n) {
        Ensemble next = phi_apply(m, current, dw, exec);
        NormEstimate d = norm_T(next, current);
        IterationRecord rec;
        rec.iteration = n;
        rec.norm = d.value;
        rec.norm_se = d.std_error;
        if (n > 1) std::tie(rec.ratio, rec.ratio_se) = norm_ratio(d, previous);
        rec.at_roundoff = d.value <= 64.0 * std::numeric_limits<double>::epsilon() * norm_T(next);
        res.log.push_back(rec);
        current = std::move(next);
        previous = std::move(d);
        if (rec.norm < opt.tol) {
            res.converged = true;
            break;
        }
    }
    if (!res.converged && res.log.size() > 1 && !(res.log.back().ratio < 1.0)) {
        fail(ErrorKind::NonConvergence, "Picard iteration stalled after " + fmt(res.log.size()) +
                                            " iterations (ratio " + fmt(res.log.back().ratio) + ")");
    }
    res.solution = std::move(current);
    return res;
}

inline FixedPointResult solve_fixed_point(const ModelSpec& m, const PathGrid& grid, std::uint64_t seed,
                                          std::size_t n_paths, const FixedPointOptions& opt = {},
                                          const Execution& exec = {}) {
    const auto dw = Increments::draw(grid, seed, n_paths);
    return solve_fixed_point(m, dw, std::vector<double>(n_paths, m.x0), opt, exec);
}

struct IntervalResult {
    std::size_t index = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double c = 0.0;
    McEstimate terminal_second_moment;  // E[X^2(t_end)], the non-explosion report
    std::vector<IterationRecord> log;
};

struct GlobalResult {
    ContractionPlan plan;
    std::vector<IntervalResult> intervals;
    std::vector<Ensemble> pieces;

    /// Concatenation of all pieces over [t0, T].
    Ensemble full() const {
        Ensemble e;
        if (pieces.empty()) return e;
        std::size_t steps = 0;
        for (const auto& p : pieces) steps += p.grid.n_steps;
        e.grid = PathGrid{pieces.front().grid.t0, pieces.back().grid.T, steps};
        e.n_paths = pieces.front().n_paths;
        e.start = pieces.front().start;
        e.values.resize(e.n_paths * e.width());
        for (std::size_t i = 0; i < e.n_paths; ++i) {
            auto dst = e.row(i);
            std::size_t k = 0;
            for (std::size_t j = 0; j < pieces.size(); ++j) {
                const auto src = pieces[j].row(i);
                std::copy(src.begin() + (j == 0 ? 0 : 1), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(k));
                k += src.size() - (j == 0 ? 0 : 1);
            }
        }
        for (const auto& p : pieces) e.projections += p.projections;
        return e;
    }

    std::vector<double> terminal() const {
        std::vector<double> out;
        if (pieces.empty()) return out;
        const auto& last = pieces.back();
        for (std::size_t i = 0; i < last.n_paths; ++i) out.push_back(last.row(i).back());
        return out;
    }
};

/// Chains solve_fixed_point over ceil((T - t0) / T*) equal subintervals, each
/// started from the previous terminal states. Subinterval k uses increments
/// k * n_steps ... of the same per-path streams, so the chained solution is
/// driven by one Brownian path per index.
inline GlobalResult solve_global(const ModelSpec& m, double t0, double T, double dt, std::uint64_t seed,
                                 std::size_t n_paths, const FixedPointOptions& opt = {}, const Execution& exec = {}) {
    GlobalResult res;
    res.plan = make_contraction_plan(m, t0, T, opt.c_target);
    const std::size_t steps =
        static_cast<std::size_t>(std::max(1.0, std::round(res.plan.interval_length / dt)));
    std::vector<double> start(n_paths, m.x0);
    for (std::size_t k = 0; k < res.plan.n_intervals; ++k) {
        const double a = t0 + static_cast<double>(k) * res.plan.interval_length;
        const double b = k + 1 == res.plan.n_intervals ? T : t0 + static_cast<double>(k + 1) * res.plan.interval_length;
        const PathGrid grid{a, b, steps};
        const auto dw = Increments::draw(grid, seed, n_paths, static_cast<std::uint64_t>(k) * steps);
        FixedPointResult fp;
        try {
            fp = solve_fixed_point(m, dw, start, opt, exec);
        } catch (const Error& e) {
            throw Error(e.kind(), "interval " + fmt(k) + ": " + e.reason());
        }
        IntervalResult ir;
        ir.index = k;
        ir.t_begin = a;
        ir.t_end = b;
        ir.iterations = fp.log.size();
        ir.converged = fp.converged;
        ir.c = fp.c;
        ir.log = fp.log;
        std::vector<double> sq(n_paths);
        for (std::size_t i = 0; i < n_paths; ++i) {
            start[i] = fp.solution.row(i).back();
            sq[i] = start[i] * start[i];
        }
        ir.terminal_second_moment = summarize(sq, "E[X^2(t_end)]", seed);
        if (!std::isfinite(ir.terminal_second_moment.mean)) {
            fail(ErrorKind::Overflow, "second moment exploded on interval " + fmt(k));
        }
        res.intervals.push_back(std::move(ir));
        res.pieces.push_back(std::move(fp.solution));
    }
    return res;
}

}  // namespace vexsde
