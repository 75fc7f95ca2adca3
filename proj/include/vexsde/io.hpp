// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "vexsde/analysis.hpp"
#include "vexsde/exponents.hpp"
#include "vexsde/fk_poisson.hpp"
#include "vexsde/model.hpp"
#include "vexsde/parallel.hpp"
#include "vexsde/picard.hpp"
#include "vexsde/simulate.hpp"

namespace vexsde::io {

using nlohmann::json;

/// Shortest round-trip text for a double; non-finite values as nan/inf.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON number, or null for non-finite values.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const McEstimate& e) {
    return {{"observable", e.observable}, {"mean", jnum(e.mean)}, {"std_error", jnum(e.std_error)},
            {"n_paths", e.n_paths}, {"seed", e.seed}};
}

inline json to_json(const ClassSReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        json j{{"hypothesis", c.id}, {"pass", c.passed}, {"detail", c.detail}};
        j["witness_x"] = c.witness_x ? jnum(*c.witness_x) : json(nullptr);
        checks.push_back(j);
    }
    return {{"function", r.function}, {"pass", r.passed()}, {"h2_verdict", r.h2_label}, {"checks", checks}};
}

inline json to_json(const GrowthCertificate& c) {
    return {{"K", jnum(c.K)}, {"M_inf", jnum(c.M_inf)}, {"R_inf", jnum(c.R_inf)}, {"K_tail", jnum(c.K_tail)},
            {"max_ratio", jnum(c.max_ratio)}, {"argmax_x", jnum(c.argmax_x)}};
}

inline json to_json(const FellerReport& r) {
    json pts = json::array();
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        pts.push_back({{"x", jnum(r.x[i])}, {"T", jnum(r.value[i])}, {"lower_bound_2a", jnum(r.lower_bound[i])}});
    }
    return {{"t", jnum(r.t)}, {"tol", jnum(r.tol)}, {"verdict", r.non_attainable ? "non-attainable" : "inconclusive"},
            {"pass", r.non_attainable}, {"detail", r.detail}, {"points", pts}};
}

inline void write_csv(std::ostream& os, const FellerReport& r) {
    os << "x,T,lower_bound\n";
    for (std::size_t i = 0; i < r.x.size(); ++i) os << num(r.x[i]) << ',' << num(r.value[i]) << ',' << num(r.lower_bound[i]) << '\n';
}

/// Columns t, X, dW; dW is the increment leaving t (empty on the last row).
inline void write_csv(std::ostream& os, const Path& p) {
    os << "t,X,dW\n";
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        os << num(p.grid.time(k)) << ',' << num(p.values[k]) << ',';
        if (k < p.dW.size()) os << num(p.dW[k]);
        os << '\n';
    }
}

inline json to_json(const ContractionPlan& p) {
    return {{"L", jnum(p.L)}, {"mu_plus", jnum(p.mu_plus)}, {"sigma_plus", jnum(p.sigma_plus)},
            {"c_target", jnum(p.c_target)}, {"T_star", jnum(p.T_star)}, {"n_intervals", p.n_intervals},
            {"interval_length", jnum(p.interval_length)}, {"formula", p.formula}};
}

inline json to_json(const IterationRecord& r) {
    return {{"iteration", r.iteration}, {"norm", jnum(r.norm)}, {"norm_se", jnum(r.norm_se)},
            {"ratio", jnum(r.ratio)}, {"ratio_se", jnum(r.ratio_se)}, {"at_roundoff", r.at_roundoff}};
}

inline json to_json(const GlobalResult& g) {
    json intervals = json::array();
    for (const auto& iv : g.intervals) {
        json log = json::array();
        for (const auto& r : iv.log) log.push_back(to_json(r));
        intervals.push_back({{"index", iv.index}, {"t_begin", jnum(iv.t_begin)}, {"t_end", jnum(iv.t_end)},
                             {"iterations", iv.iterations}, {"converged", iv.converged}, {"c", jnum(iv.c)},
                             {"terminal_second_moment", to_json(iv.terminal_second_moment)}, {"log", log}});
    }
    return {{"plan", to_json(g.plan)}, {"intervals", intervals}};
}

/// Columns interval, iteration, norm, ratio.
inline void write_csv(std::ostream& os, const GlobalResult& g) {
    os << "interval,iteration,norm,ratio\n";
    for (const auto& iv : g.intervals) {
        for (const auto& r : iv.log) {
            os << iv.index << ',' << r.iteration << ',' << num(r.norm) << ',';
            if (std::isfinite(r.ratio)) os << num(r.ratio);
            os << '\n';
        }
    }
}

inline json to_json(const MomentReport& r) {
    json bound = json::array();
    for (double b : r.bound) bound.push_back(jnum(b));
    json vac = json::array();
    for (bool v : r.vacuous) vac.push_back(v);
    return {{"theorem", "moment bound"},
            {"parameters", {{"m", r.m}, {"x0_moment", r.x0_m ? "E[x0^m]" : "E[x0^2]"}, {"n_paths", r.n_paths}, {"seed", r.seed}}},
            {"checkpoints", r.t},
            {"empirical", r.empirical},
            {"std_error", r.std_error},
            {"bound", bound},
            {"bound_vacuous", vac},
            {"pass", r.pass}};
}

inline void write_csv(std::ostream& os, const MomentReport& r) {
    os << "t,empirical,SE,bound\n";
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        os << num(r.t[i]) << ',' << num(r.empirical[i]) << ',' << num(r.std_error[i]) << ',' << num(r.bound[i]) << '\n';
    }
}

inline json to_json(const AsymptoticReport& r) {
    return {{"theorem", "asymptotic growth"},
            {"parameters", {{"T_long", r.T_long}, {"n_paths", r.n_paths}, {"seed", r.seed}, {"window", "t >= T_long/2"}}},
            {"K_hat", jnum(r.K_hat)},
            {"quantiles", {{"p01", jnum(r.p01)}, {"p50", jnum(r.p50)}, {"p99", jnum(r.p99)}}},
            {"terminal_median", jnum(r.terminal_median)},
            {"pass", r.pass}};
}

inline json to_json(const StabilityReport& r) {
    return {{"theorem", "m-th power stability"},
            {"parameters", {{"m", r.m}, {"xi", r.xi}, {"eta", r.eta}, {"horizon", r.constants.T}}},
            {"C_m", jnum(r.constants.C_m())},
            {"L", jnum(r.constants.L)},
            {"L_bar", jnum(r.constants.L_bar())},
            {"factor", jnum(r.constants.factor())},
            {"empirical", to_json(r.empirical)},
            {"bound", jnum(r.bound)},
            {"ratio", jnum(r.ratio)},
            {"halved", to_json(r.halved)},
            {"scaling", jnum(r.scaling)},
            {"fitted_exponent", jnum(r.fitted_exponent)},
            {"scaling_ok", r.scaling_ok},
            {"pass", r.pass}};
}

inline json to_json(const CrossValidationReport& r) {
    json probes = json::array();
    for (const auto& p : r.probes) {
        probes.push_back({{"probe", p.probe},
                          {"fk_mean", jnum(p.fk.value.mean)},
                          {"fk_se", jnum(p.fk.value.std_error)},
                          {"fk_half_mean", jnum(p.fk_half.value.mean)},
                          {"c_bias", jnum(p.c_bias)},
                          {"allowance", jnum(p.allowance)},
                          {"fd_value", jnum(p.fd_value)},
                          {"diff", jnum(p.diff)},
                          {"mean_exit_time", jnum(p.fk.mean_exit_time)},
                          {"max_path_length", p.fk.max_path_length},
                          {"exits_low", p.fk.exits_low},
                          {"exits_high", p.fk.exits_high},
                          {"pass", p.pass}});
    }
    return {{"probes", probes},
            {"dt", jnum(r.dt)},
            {"dt_heuristic", jnum(r.dt_heuristic)},
            {"lambda", jnum(r.lambda)},
            {"drift_lipschitz_bound", jnum(r.drift_lipschitz_bound)},
            {"fd_residual", jnum(r.fd.residual)},
            {"fd_relative_residual", jnum(r.fd.relative_residual)},
            {"pass", r.pass}};
}

inline void write_csv(std::ostream& os, const FdSolution& s) {
    os << "x,u\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << num(s.x[i]) << ',' << num(s.u[i]) << '\n';
}

}  // namespace vexsde::io
