// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vexsde/errors.hpp"
#include "vexsde/exponents.hpp"

namespace vexsde {

/// Deterministic scale mu(t) or sigma(t) on [0, T] with sampled bounds.
struct CoefficientFunction {
    std::string name;
    std::function<double(double)> f;
    double f_minus = 0.0;
    double f_plus = 0.0;
    std::optional<double> constant;

    double operator()(double t) const { return f(t); }
};

namespace coefficient {

inline CoefficientFunction make_const(double v) {
    CoefficientFunction c;
    c.name = "const:" + fmt(v);
    c.f = [v](double) { return v; };
    c.f_minus = c.f_plus = v;
    c.constant = v;
    return c;
}

inline CoefficientFunction make_linear(double a, double b) {
    CoefficientFunction c;
    c.name = "linear:" + fmt(a) + "," + fmt(b);
    c.f = [a, b](double t) { return a + b * t; };
    if (b == 0.0) c.constant = a;
    return c;
}

inline CoefficientFunction make_sine(double a, double b, double w) {
    CoefficientFunction c;
    c.name = "sine:" + fmt(a) + "," + fmt(b) + "," + fmt(w);
    c.f = [a, b, w](double t) { return a + b * std::sin(w * t); };
    if (b == 0.0 || w == 0.0) c.constant = a;
    return c;
}

namespace detail {
inline std::vector<double> split_numbers(std::string_view body, std::string_view what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= body.size()) {
        const auto comma = body.find(',', start);
        const auto end = comma == std::string_view::npos ? body.size() : comma;
        out.push_back(exponent::parse_number(body.substr(start, end - start), what));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}
}  // namespace detail

/// "const:<v>", "linear:<a>,<b>" (a + b t), "sine:<a>,<b>,<w>" (a + b sin(w t)).
inline CoefficientFunction parse(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) fail(ErrorKind::Config, "unknown coefficient '" + std::string(spec) + "'");
    const auto kind = spec.substr(0, colon);
    const auto args = detail::split_numbers(spec.substr(colon + 1), spec);
    if (kind == "const" && args.size() == 1) return make_const(args[0]);
    if (kind == "linear" && args.size() == 2) return make_linear(args[0], args[1]);
    if (kind == "sine" && args.size() == 3) return make_sine(args[0], args[1], args[2]);
    fail(ErrorKind::Config, "unknown coefficient '" + std::string(spec) + "'");
}

}  // namespace coefficient

/// Certifies f_minus/f_plus on [0, T] by sampling `samples + 1` points. Declared
/// analytic bounds, when given, must enclose every sample; the tighter of the
/// sampled and declared values is kept.
inline void certify_coefficient(CoefficientFunction& c, double T, std::optional<double> declared_min = {},
                                std::optional<double> declared_max = {}, bool allow_zero = false,
                                std::size_t samples = 4096) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= samples; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(samples);
        const double v = c.f(t);
        if (!std::isfinite(v)) fail(ErrorKind::Domain, c.name + " is not finite at t = " + fmt(t));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (declared_min && lo < *declared_min) {
        fail(ErrorKind::Domain, c.name + ": sampled minimum " + fmt(lo) + " below declared bound");
    }
    if (declared_max && hi > *declared_max) {
        fail(ErrorKind::Domain, c.name + ": sampled maximum " + fmt(hi) + " above declared bound");
    }
    if (allow_zero ? lo < 0.0 : !(lo > 0.0)) {
        fail(ErrorKind::Domain, c.name + " must stay positive on [0, T]: minimum " + fmt(lo));
    }
    c.f_minus = lo;
    c.f_plus = hi;
}

/// dX = mu(t) X^{p(X)} dt + sigma(t) X^{q(X)} dW on [t0, T], X(t0) = x0 > 0.
struct ModelSpec {
    ExponentFunction p;
    ExponentFunction q;
    CoefficientFunction mu;
    CoefficientFunction sigma;
    double x0 = 1.0;
    double t0 = 0.0;
    double T = 1.0;

    GrowthCertificate p_cert;
    GrowthCertificate q_cert;
    double K = 1.0;  // shared growth constant, max of both certificates
    double L = 0.0;  // Lipschitz certificate for both coefficients

    double mu_plus_bar() const { return std::max(mu.f_minus, mu.f_plus); }
    double sigma_plus_bar() const { return std::max(sigma.f_minus, sigma.f_plus); }

    bool is_gbm() const {
        return p.constant == 1.0 && q.constant == 1.0 && mu.constant.has_value() && sigma.constant.has_value();
    }

    ModelSpec with_x0(double x) const {
        if (!(x > 0.0)) fail(ErrorKind::Domain, "initial state must be positive");
        ModelSpec m = *this;
        m.x0 = x;
        return m;
    }
};

struct ModelOptions {
    LogGrid grid{};
    /// Permits mu or sigma identically 0 (diagnostic limits such as the
    /// deterministic ODE); well-posedness proper needs both strictly positive.
    bool allow_degenerate = false;
    std::size_t coefficient_samples = 4096;
    std::optional<double> mu_min, mu_max, sigma_min, sigma_max;
};

inline ModelSpec make_model(ExponentFunction p, ExponentFunction q, CoefficientFunction mu,
                            CoefficientFunction sigma, double x0, double T, const ModelOptions& opt = {},
                            double t0 = 0.0) {
    if (!(x0 > 0.0) || !std::isfinite(x0)) fail(ErrorKind::Domain, "x0 must be a finite positive number");
    if (!(T > t0) || !(t0 >= 0.0) || !std::isfinite(T)) fail(ErrorKind::Domain, "need 0 <= t0 < T < inf");
    for (const ExponentFunction* e : {&p, &q}) {
        const auto report = validate_class_s(*e, opt.grid);
        for (const auto& c : report.checks) {
            if (!c.passed) fail(ErrorKind::ClassS, e->name + " fails " + c.id + ": " + c.detail);
        }
    }
    certify_coefficient(mu, T, opt.mu_min, opt.mu_max, opt.allow_degenerate, opt.coefficient_samples);
    certify_coefficient(sigma, T, opt.sigma_min, opt.sigma_max, opt.allow_degenerate, opt.coefficient_samples);

    ModelSpec m;
    m.p = std::move(p);
    m.q = std::move(q);
    m.mu = std::move(mu);
    m.sigma = std::move(sigma);
    m.x0 = x0;
    m.t0 = t0;
    m.T = T;
    m.p_cert = growth_certificate(m.p, opt.grid);
    m.q_cert = growth_certificate(m.q, opt.grid);
    m.K = std::max(m.p_cert.K, m.q_cert.K);
    m.L = lipschitz_constant(m.p, m.q, m.mu_plus_bar(), m.sigma_plus_bar(), opt.grid);
    return m;
}

namespace detail {
inline void check_point(const ModelSpec& m, double t, double x) {
    if (!(x > 0.0)) fail(ErrorKind::Domain, "state must be positive, got " + fmt(x));
    const double slack = 1e-12 * std::max(1.0, m.T);
    if (!(t >= -slack && t <= m.T + slack)) {
        fail(ErrorKind::Domain, "time " + fmt(t) + " outside [0, T]");
    }
}
}  // namespace detail

inline double drift(const ModelSpec& m, double t, double x) {
    detail::check_point(m, t, x);
    return m.mu(t) * variable_power(m.p, x);
}

inline double diffusion(const ModelSpec& m, double t, double x) {
    detail::check_point(m, t, x);
    return m.sigma(t) * variable_power(m.q, x);
}

/// d/dx of the diffusion coefficient; the Milstein correction needs it.
inline double diffusion_dx(const ModelSpec& m, double t, double x) {
    detail::check_point(m, t, x);
    return m.sigma(t) * variable_power_dx(m.q, x);
}

struct FellerReport {
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> value;        // T(t,x) with the exact derivative of x^{2q(x)}
    std::vector<double> lower_bound;  // mu- x^p - (sigma+)^2 (M0 x^{2q}|log x| + x^{2q-1} q+)
    double tol = 1e-6;
    bool non_attainable = false;
    std::string detail;
};

/// Local Feller test at the boundary 0:
///   T(t,x) = mu(t) x^{p(x)} - sigma(t)^2/2 d/dx x^{2q(x)}.
/// Verdict "non-attainable" when on the tail (second half) of the decreasing
/// grid T >= -tol, |T| does not increase, and the last |T| is within tol.
inline FellerReport feller_diagnostic(const ModelSpec& m, double t, const std::vector<double>& x_grid,
                                      double tol = 1e-6) {
    if (x_grid.size() < 2) fail(ErrorKind::Domain, "Feller grid needs at least two points");
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        if (!(x_grid[i] > 0.0)) fail(ErrorKind::Domain, "Feller grid contains a non-positive point");
        if (i > 0 && !(x_grid[i] < x_grid[i - 1])) fail(ErrorKind::Domain, "Feller grid must decrease toward 0");
    }
    detail::check_point(m, t, x_grid.front());

    FellerReport r;
    r.t = t;
    r.x = x_grid;
    r.tol = tol;
    const double mu_t = m.mu(t);
    const double s_t = m.sigma(t);
    for (double x : x_grid) {
        const double qx = m.q.h(x);
        const double lx = std::log(x);
        const double d_x2q = 2.0 * std::pow(x, 2.0 * qx - 1.0) * (m.q.h_prime(x) * x * lx + qx);
        r.value.push_back(mu_t * variable_power(m.p, x) - 0.5 * s_t * s_t * d_x2q);
        const double sp = m.sigma.f_plus;
        r.lower_bound.push_back(m.mu.f_minus * variable_power(m.p, x) -
                                sp * sp *
                                    (m.q.M0 * std::pow(x, 2.0 * qx) * std::abs(lx) +
                                     std::pow(x, 2.0 * qx - 1.0) * m.q.h_plus));
    }

    const std::size_t tail = x_grid.size() / 2;
    bool ok = true;
    for (std::size_t i = tail; i < r.value.size(); ++i) {
        if (r.value[i] < -tol) {
            ok = false;
            r.detail = "T < -tol at x = " + fmt(r.x[i]);
            break;
        }
        if (i > tail && std::abs(r.value[i]) > std::abs(r.value[i - 1]) * (1.0 + 1e-12)) {
            ok = false;
            r.detail = "|T| increases toward 0 at x = " + fmt(r.x[i]);
            break;
        }
    }
    if (ok && std::abs(r.value.back()) > tol) {
        ok = false;
        r.detail = "|T| at the smallest x exceeds tol; grid does not reach the boundary layer";
    }
    r.non_attainable = ok;
    if (ok) r.detail = "tail non-negative within tol and decreasing to 0";
    return r;
}

}  // namespace vexsde
