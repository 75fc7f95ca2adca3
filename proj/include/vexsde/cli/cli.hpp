// SPDX-License-Identifier: MIT
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vexsde/cli/config.hpp"
#include "vexsde/io.hpp"
#include "vexsde/vexsde.hpp"

#ifndef VEXSDE_VERSION
#define VEXSDE_VERSION "0.0.0"
#endif

namespace vexsde::cli {

/// Exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitOverflow = 3;

inline constexpr const char* kOutputDirEnv = "VEXSDE_OUTPUT_DIR";

struct Invocation {
    std::string subcommand;
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<std::string> scheme;
    std::optional<std::string> out_dir;
    bool moment_x0m = false;
    unsigned threads = 0;
};

/// Artifacts produced by one experiment, written only after it succeeds.
class Artifacts {
public:
    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
    void add_json(std::string name, const nlohmann::json& j) { add(std::move(name), j.dump(2) + "\n"); }
    template <typename T>
    void add_csv(std::string name, const T& value) {
        std::ostringstream os;
        io::write_csv(os, value);
        add(std::move(name), os.str());
    }
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

namespace detail {

inline ExponentFunction exponent_from(const Config& cfg, const std::string& which) {
    ExponentFunction f;
    try {
        f = exponent::parse(cfg.get("model", which));
    } catch (const Error& e) {
        cfg.invalid("model", which, e.reason());
    }
    if (auto v = cfg.optional_number("model", which + "_delta")) f.delta = *v;
    if (auto v = cfg.optional_number("model", which + "_M0")) f.M0 = *v;
    if (auto v = cfg.optional_number("model", which + "_C0")) f.C0 = *v;
    if (auto v = cfg.optional_number("model", which + "_alpha")) f.alpha = *v;
    return f;
}

inline CoefficientFunction coefficient_from(const Config& cfg, const std::string& which) {
    try {
        return coefficient::parse(cfg.get("model", which));
    } catch (const Error& e) {
        cfg.invalid("model", which, e.reason());
    }
}

inline LogGrid exponent_grid(const Config& cfg) {
    LogGrid g;
    g.lo = cfg.number("exponent", "grid_lo");
    g.hi = cfg.number("exponent", "grid_hi");
    g.points = cfg.integer("exponent", "grid_points");
    return g;
}

inline ModelSpec model_from(const Config& cfg, std::optional<double> horizon = {}) {
    ModelOptions opt;
    opt.grid = exponent_grid(cfg);
    opt.allow_degenerate = cfg.boolean("model", "allow_degenerate");
    opt.mu_min = cfg.optional_number("model", "mu_min");
    opt.mu_max = cfg.optional_number("model", "mu_max");
    opt.sigma_min = cfg.optional_number("model", "sigma_min");
    opt.sigma_max = cfg.optional_number("model", "sigma_max");
    const double T = horizon ? *horizon : cfg.number("model", "T");
    try {
        return make_model(exponent_from(cfg, "p"), exponent_from(cfg, "q"), coefficient_from(cfg, "mu"),
                          coefficient_from(cfg, "sigma"), cfg.number("model", "x0"), T, opt,
                          cfg.number("model", "t0"));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(ErrorKind::Config, std::string("model section: ") + e.what());
    }
}

inline PathGrid path_grid(const Config& cfg, double t0, double T) {
    if (!cfg.get("run", "n_steps").empty()) {
        const auto n = cfg.integer("run", "n_steps");
        if (n < 1) cfg.invalid("run", "n_steps", "must be >= 1");
        return PathGrid{t0, T, static_cast<std::size_t>(n)};
    }
    const double dt = cfg.number("run", "dt");
    if (!(dt > 0.0)) cfg.invalid("run", "dt", "must be positive");
    return PathGrid::from_dt(t0, T, dt);
}

inline std::size_t n_paths(const Config& cfg, const std::string& section = "run") {
    const auto n = cfg.integer(section, "n_paths");
    if (n < 2) cfg.invalid(section, "n_paths", "need at least 2 paths");
    return static_cast<std::size_t>(n);
}

inline Scheme scheme_from(const Config& cfg) {
    try {
        return parse_scheme(cfg.get("run", "scheme"));
    } catch (const Error& e) {
        cfg.invalid("run", "scheme", e.reason());
    }
}

/// Type-checks every key, used by the subcommand or not, so a typo anywhere
/// in the file is reported before any computation starts.
inline void validate_all(const Config& cfg) {
    if (cfg.integer("meta", "schema") != static_cast<std::uint64_t>(kSchemaVersion)) {
        cfg.invalid("meta", "schema", "unsupported schema version (this build reads " + fmt(kSchemaVersion) + ")");
    }
    for (const char* key : {"x0", "t0", "T"}) cfg.number("model", key);
    for (const char* key : {"p_delta", "p_M0", "p_C0", "p_alpha", "q_delta", "q_M0", "q_C0", "q_alpha", "mu_min",
                            "mu_max", "sigma_min", "sigma_max"}) {
        cfg.optional_number("model", key);
    }
    cfg.boolean("model", "allow_degenerate");
    exponent_from(cfg, "p");
    exponent_from(cfg, "q");
    coefficient_from(cfg, "mu");
    coefficient_from(cfg, "sigma");
    for (const char* key : {"seed", "n_paths", "max_iter"}) cfg.integer("run", key);
    for (const char* key : {"dt", "tol", "c_target"}) cfg.number("run", key);
    if (!cfg.get("run", "n_steps").empty()) cfg.integer("run", "n_steps");
    scheme_from(cfg);
    exponent_grid(cfg);
    cfg.number("feller", "t");
    cfg.number("feller", "tol");
    cfg.numbers("feller", "x_grid");
    cfg.integer("simulate", "export_paths");
    cfg.strings("simulate", "observables");
    cfg.numbers("moments", "orders");
    cfg.integer("moments", "checkpoints");
    cfg.boolean("moments", "x0m");
    cfg.number("asymptotic", "T_long");
    for (const char* key : {"m", "xi", "eta"}) cfg.number("stability", key);
    for (const char* key : {"a", "b", "c", "mu", "sigma", "dt"}) cfg.number("poisson", key);
    cfg.numbers("poisson", "probes");
    cfg.integer("poisson", "n_grid");
    cfg.integer("poisson", "n_paths");
    for (const auto& f : cfg.strings("output", "formats")) {
        if (f != "json" && f != "csv") cfg.invalid("output", "formats", "formats are json and csv");
    }
    if (cfg.get("output", "dir").empty()) cfg.invalid("output", "dir", "empty output directory");
}

/// A prepared experiment: configuration fully validated, computation pending.
using Experiment = std::function<bool(Artifacts&)>;

inline Experiment prepare(const std::string& sub, const Config& cfg, const Execution& exec, std::ostream& out) {
    validate_all(cfg);
    const std::uint64_t seed = cfg.integer("run", "seed");
    auto has_format = [&](const std::string& f) {
        for (const auto& x : cfg.strings("output", "formats")) {
            if (x == f) return true;
        }
        return false;
    };
    const bool json_out = has_format("json");
    const bool csv_out = has_format("csv");

    if (sub == "validate-exponent") {
        const auto grid = exponent_grid(cfg);
        const auto p = exponent_from(cfg, "p");
        const auto q = exponent_from(cfg, "q");
        auto mu = coefficient_from(cfg, "mu");
        auto sigma = coefficient_from(cfg, "sigma");
        try {
            grid.require_class_s_coverage();
            certify_coefficient(mu, cfg.number("model", "T"), {}, {}, cfg.boolean("model", "allow_degenerate"));
            certify_coefficient(sigma, cfg.number("model", "T"), {}, {}, cfg.boolean("model", "allow_degenerate"));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw;
            fail(ErrorKind::Config, e.what());
        }
        return [=, &out](Artifacts& art) {
            nlohmann::json j;
            bool pass = true;
            for (const auto* f : {&p, &q}) {
                const auto rep = validate_class_s(*f, grid);
                nlohmann::json entry = io::to_json(rep);
                entry["certificate"] = rep.passed() ? io::to_json(growth_certificate(*f, grid)) : nlohmann::json(nullptr);
                j[f == &p ? "p" : "q"] = entry;
                pass = pass && rep.passed();
            }
            j["lipschitz_L"] = pass ? io::jnum(lipschitz_constant(p, q, std::max(mu.f_minus, mu.f_plus),
                                                                 std::max(sigma.f_minus, sigma.f_plus), grid))
                                    : nlohmann::json(nullptr);
            j["pass"] = pass;
            if (json_out) art.add_json("exponent_report.json", j);
            out << "validate-exponent: p " << (j["p"]["pass"].get<bool>() ? "pass" : "FAIL") << ", q "
                << (j["q"]["pass"].get<bool>() ? "pass" : "FAIL") << '\n';
            return pass;
        };
    }

    if (sub == "feller") {
        const auto model = model_from(cfg);
        const double t = cfg.number("feller", "t");
        const auto xs = cfg.numbers("feller", "x_grid");
        const double tol = cfg.number("feller", "tol");
        return [=, &out](Artifacts& art) {
            const auto rep = feller_diagnostic(model, t, xs, tol);
            if (json_out) art.add_json("feller.json", io::to_json(rep));
            if (csv_out) art.add_csv("feller.csv", rep);
            out << "feller: " << (rep.non_attainable ? "non-attainable" : "inconclusive") << " (" << rep.detail << ")\n";
            return rep.non_attainable;
        };
    }

    if (sub == "simulate") {
        const auto model = model_from(cfg);
        const auto grid = path_grid(cfg, model.t0, model.T);
        const auto scheme = scheme_from(cfg);
        if (scheme == Scheme::gbm_exact && !model.is_gbm()) {
            fail(ErrorKind::SchemeMismatch, cfg.where("run", "scheme") +
                                                ": run.scheme: gbm_exact requires p = q = 1 and constant mu, sigma");
        }
        const auto n = n_paths(cfg);
        std::vector<Observable> obs;
        for (const auto& name : cfg.strings("simulate", "observables")) {
            try {
                obs.push_back(observable::parse(name));
            } catch (const Error& e) {
                cfg.invalid("simulate", "observables", e.reason());
            }
        }
        const auto n_export = cfg.integer("simulate", "export_paths");
        return [=, &out](Artifacts& art) {
            const auto est = simulate_batch(model, grid, scheme, seed, n, obs, exec);
            nlohmann::json records = nlohmann::json::array();
            for (const auto& e : est) records.push_back(io::to_json(e));
            if (json_out) art.add_json("estimates.json", records);
            if (csv_out) {
                for (std::uint64_t i = 0; i < std::min<std::uint64_t>(n_export, n); ++i) {
                    art.add_csv("path_" + std::to_string(i) + ".csv", simulate_path(model, grid, scheme, seed, i));
                }
            }
            for (const auto& e : est) out << "simulate: " << e.observable << " = " << io::num(e.mean) << " +- " << io::num(e.std_error) << '\n';
            return true;
        };
    }

    if (sub == "picard") {
        const auto model = model_from(cfg);
        const double dt = path_grid(cfg, model.t0, model.T).dt();
        const auto n = n_paths(cfg);
        FixedPointOptions opt;
        opt.tol = cfg.number("run", "tol");
        opt.max_iter = cfg.integer("run", "max_iter");
        opt.c_target = cfg.number("run", "c_target");
        if (!(opt.c_target > 0.0 && opt.c_target < 1.0)) cfg.invalid("run", "c_target", "must lie in (0, 1)");
        if (!(opt.tol > 0.0)) cfg.invalid("run", "tol", "must be positive");
        return [=, &out](Artifacts& art) {
            const auto res = solve_global(model, model.t0, model.T, dt, seed, n, opt, exec);
            bool pass = true;
            for (const auto& iv : res.intervals) pass = pass && iv.converged;
            auto j = io::to_json(res);
            j["pass"] = pass;
            if (json_out) art.add_json("picard.json", j);
            if (csv_out) art.add_csv("picard_log.csv", res);
            out << "picard: " << res.plan.n_intervals << " interval(s), T* = " << io::num(res.plan.T_star)
                << (pass ? ", all converged" : ", NOT converged") << '\n';
            return pass;
        };
    }

    if (sub == "moments") {
        const auto model = model_from(cfg);
        const auto grid = path_grid(cfg, model.t0, model.T);
        const auto n = n_paths(cfg);
        const auto orders = cfg.numbers("moments", "orders");
        for (double m : orders) {
            if (!(m >= 2.0)) cfg.invalid("moments", "orders", "orders must be >= 2");
        }
        MomentOptions opt;
        opt.checkpoints = cfg.integer("moments", "checkpoints");
        opt.use_x0_m = cfg.boolean("moments", "x0m");
        opt.scheme = scheme_from(cfg);
        if (opt.scheme == Scheme::gbm_exact && !model.is_gbm()) {
            fail(ErrorKind::SchemeMismatch, "run.scheme: gbm_exact requires a GBM model");
        }
        return [=, &out](Artifacts& art) {
            const auto reps = verify_moment_bounds(model, orders, grid, seed, n, opt, exec);
            nlohmann::json all = nlohmann::json::array();
            bool pass = true;
            for (const auto& r : reps) {
                all.push_back(io::to_json(r));
                pass = pass && r.pass;
                if (csv_out) art.add_csv("moments_m" + io::num(r.m) + ".csv", r);
                out << "moments: m = " << io::num(r.m) << (r.pass ? " pass" : " FAIL") << '\n';
            }
            if (json_out) art.add_json("moments.json", {{"reports", all}, {"pass", pass}});
            return pass;
        };
    }

    if (sub == "asymptotic") {
        const double T_long = cfg.number("asymptotic", "T_long");
        if (!(T_long >= 10.0)) cfg.invalid("asymptotic", "T_long", "must be >= 10");
        const auto model = model_from(cfg, T_long);
        const double dt = path_grid(cfg, model.t0, T_long).dt();
        const auto n = n_paths(cfg);
        const auto scheme = scheme_from(cfg);
        return [=, &out](Artifacts& art) {
            const auto rep = verify_asymptotic(model, T_long, dt, seed, n, scheme, exec);
            if (json_out) art.add_json("asymptotic.json", io::to_json(rep));
            out << "asymptotic: p99 = " << io::num(rep.p99) << ", K_hat = " << io::num(rep.K_hat)
                << (rep.pass ? " pass" : " FAIL") << '\n';
            return rep.pass;
        };
    }

    if (sub == "stability") {
        const auto model = model_from(cfg);
        const auto grid = path_grid(cfg, model.t0, model.T);
        const auto n = n_paths(cfg);
        const double m = cfg.number("stability", "m");
        const double xi = cfg.number("stability", "xi");
        const double eta = cfg.number("stability", "eta");
        if (!(m >= 2.0)) cfg.invalid("stability", "m", "must be >= 2");
        if (!(xi > 0.0)) cfg.invalid("stability", "xi", "must be positive");
        if (!(eta > 0.0)) cfg.invalid("stability", "eta", "must be positive");
        const auto scheme = scheme_from(cfg);
        if (scheme == Scheme::gbm_exact && !model.is_gbm()) {
            fail(ErrorKind::SchemeMismatch, "run.scheme: gbm_exact requires a GBM model");
        }
        return [=, &out](Artifacts& art) {
            const auto rep = verify_stability(model, m, xi, eta, grid, seed, n, scheme, exec);
            if (json_out) art.add_json("stability.json", io::to_json(rep));
            out << "stability: empirical = " << io::num(rep.empirical.mean) << ", bound = " << io::num(rep.bound)
                << (rep.pass ? " pass" : " FAIL") << '\n';
            return rep.pass;
        };
    }

    if (sub == "poisson") {
        PoissonProblem prob;
        prob.a = cfg.number("poisson", "a");
        prob.b = cfg.number("poisson", "b");
        prob.c = cfg.number("poisson", "c");
        prob.mu = cfg.number("poisson", "mu");
        prob.sigma = cfg.number("poisson", "sigma");
        prob.p = exponent_from(cfg, "p");
        prob.q = exponent_from(cfg, "q");
        try {
            for (const auto* e : {&prob.p, &prob.q}) {
                const auto rep = validate_class_s(*e, exponent_grid(cfg));
                if (!rep.passed()) fail(ErrorKind::ClassS, e->name + " is not in class S");
            }
            prob.source = source::parse(cfg.get("poisson", "f"), prob);
            prob.validate();
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw;
            fail(ErrorKind::Config, std::string("poisson section: ") + e.what());
        }
        const auto probes = cfg.numbers("poisson", "probes");
        for (double x : probes) {
            if (!(x > prob.a && x < prob.b)) cfg.invalid("poisson", "probes", "probes must lie inside (a, b)");
        }
        const auto n_grid = cfg.integer("poisson", "n_grid");
        if (n_grid < 16) cfg.invalid("poisson", "n_grid", "must be >= 16");
        const double dt = cfg.number("poisson", "dt");
        if (!(dt > 0.0)) cfg.invalid("poisson", "dt", "must be positive");
        const auto n = n_paths(cfg, "poisson");
        return [=, &out](Artifacts& art) {
            const auto rep = cross_validate(prob, probes, dt, n, n_grid, seed, exec);
            if (json_out) art.add_json("poisson.json", io::to_json(rep));
            if (csv_out) art.add_csv("fd_solution.csv", rep.fd);
            for (const auto& p : rep.probes) {
                out << "poisson: x = " << io::num(p.probe) << " fk = " << io::num(p.fk.value.mean) << " fd = "
                    << io::num(p.fd_value) << (p.pass ? " pass" : " FAIL") << '\n';
            }
            return rep.pass;
        };
    }

    fail(ErrorKind::Config, "unknown subcommand '" + sub + "'");
}

inline void write_artifacts(const std::filesystem::path& dir, const Artifacts& art) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : art.files()) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) fail(ErrorKind::Config, "cannot write " + (dir / name).string());
        f << content;
    }
}

}  // namespace detail

inline const std::vector<std::pair<std::string, std::string>>& subcommands() {
    static const std::vector<std::pair<std::string, std::string>> s{
        {"validate-exponent", "Check the exponents p, q on a log grid and report K and L"},
        {"feller", "Boundary behaviour of the drift-diffusion balance near 0"},
        {"simulate", "Monte Carlo estimates of path observables"},
        {"picard", "Contraction-planned fixed-point solve over the horizon"},
        {"moments", "Empirical moments against the a priori bound"},
        {"asymptotic", "Long-run growth rate (1/t) log X(t) against K_hat"},
        {"stability", "Initial-data stability against the analytic factor"},
        {"poisson", "Feynman-Kac versus finite differences for the exit problem"},
    };
    return s;
}

/// Runs one subcommand end to end and returns the process exit code.
inline int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
    const auto started = std::chrono::steady_clock::now();
    Config cfg;
    detail::Experiment experiment;
    try {
        cfg = inv.config_path.empty() ? Config::parse("", "<defaults>") : Config::load(inv.config_path);
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.set("output", "dir", env, kOutputDirEnv);
        for (const auto& s : inv.sets) cfg.set_override(s);
        if (inv.seed) cfg.set("run", "seed", std::to_string(*inv.seed), "--seed");
        if (inv.tol) cfg.set("run", "tol", io::num(*inv.tol), "--tol");
        if (inv.scheme) cfg.set("run", "scheme", *inv.scheme, "--scheme");
        if (inv.out_dir) cfg.set("output", "dir", *inv.out_dir, "--out");
        if (inv.moment_x0m) cfg.set("moments", "x0m", "true", "--moment-x0m");
        experiment = detail::prepare(inv.subcommand, cfg, Execution{inv.threads}, out);
    } catch (const Error& e) {
        err << "vexsde " << inv.subcommand << ": " << e.what() << '\n';
        return kExitConfig;
    }

    Artifacts art;
    bool pass = false;
    try {
        pass = experiment(art);
    } catch (const Error& e) {
        err << "vexsde " << inv.subcommand << ": " << e.what() << '\n';
        return e.kind() == ErrorKind::Overflow ? kExitOverflow : kExitFailed;
    }

    // The manifest is itself a loadable config: header comments, then every
    // resolved key. Output location is excluded so reruns elsewhere match.
    const std::string resolved = cfg.resolved_text({"output.dir"});
    const std::uint64_t hash = fnv1a(resolved);
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(hash));
    std::ostringstream manifest;
    manifest << "# vexsde manifest\n"
             << "# version = vexsde " << VEXSDE_VERSION << "\n"
             << "# schema = " << kSchemaVersion << "\n"
             << "# subcommand = " << inv.subcommand << "\n"
             << "# config_hash = fnv1a64:" << hash_hex << "\n"
             << "# seed = " << cfg.get("run", "seed") << "\n"
             << "# pass = " << (pass ? "true" : "false") << "\n"
             << resolved;
    art.add("manifest.cfg", manifest.str());

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const std::filesystem::path dir = cfg.get("output", "dir");
    try {
        detail::write_artifacts(dir, art);
        std::ofstream timing(dir / "timing.json");
        timing << nlohmann::json{{"wall_time_s", wall}, {"threads", Execution{inv.threads}.resolved()}}.dump(2) << '\n';
    } catch (const std::exception& e) {
        err << "vexsde " << inv.subcommand << ": " << e.what() << '\n';
        return kExitFailed;
    }
    out << "artifacts written to " << dir.string() << '\n';
    return pass ? kExitPass : kExitFailed;
}

/// Parses argv with CLI11 and executes the selected subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Simulation and verification toolkit for SDEs with state-dependent variable exponents", "vexsde"};
    app.set_version_flag("--version", std::string("vexsde ") + VEXSDE_VERSION);
    app.require_subcommand(1);
    Invocation inv;
    std::uint64_t seed = 0;
    double tol = 0.0;
    std::string scheme, out_dir;
    std::vector<CLI::App*> subs;
    for (const auto& [name, description] : subcommands()) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config,-c", inv.config_path, "Config file (sectioned key = value)");
        sub->add_option("--set", inv.sets, "Override any key: section.key=value")->allow_extra_args(false);
        sub->add_option("--seed", seed, "run.seed");
        sub->add_option("--tol", tol, "run.tol");
        sub->add_option("--scheme", scheme, "run.scheme: euler, milstein or gbm_exact");
        sub->add_option("--out,-o", out_dir, "output.dir (overrides $VEXSDE_OUTPUT_DIR)");
        sub->add_option("--threads", inv.threads, "Worker cap; 0 = hardware concurrency. Output does not depend on it");
        sub->add_flag("--moment-x0m", inv.moment_x0m, "Use E[x0^m] instead of E[x0^2] in the moment bound");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitConfig;
    }
    for (auto* sub : subs) {
        if (sub->parsed()) {
            inv.subcommand = sub->get_name();
            if (sub->count("--seed")) inv.seed = seed;
            if (sub->count("--tol")) inv.tol = tol;
            if (sub->count("--scheme")) inv.scheme = scheme;
            if (sub->count("--out")) inv.out_dir = out_dir;
        }
    }
    return execute(inv, out, err);
}

}  // namespace vexsde::cli
