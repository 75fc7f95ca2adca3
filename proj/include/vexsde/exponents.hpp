// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "vexsde/errors.hpp"

namespace vexsde {

/// A candidate variable exponent h: (0, inf) -> [1, inf) together with its
/// analytic derivative and the constants of the class-S derivative bound
///   |h'(x)| <= M0 on (0, delta],   |h'(x)| <= C0 x^-(1+alpha) on (delta, inf).
struct ExponentFunction {
    std::string name;
    std::function<double(double)> h;
    std::function<double(double)> h_prime;
    double h_minus = 1.0;
    double h_plus = 1.0;
    double delta = 1.0;
    double M0 = 1.0;
    double C0 = 1.0;
    double alpha = 1.0;
    /// Set when h is constant; lets callers detect GBM/CEV reductions.
    std::optional<double> constant;

    double operator()(double x) const { return h(x); }
};

namespace exponent {

/// h(x) = 1 + 0.5/(1+x) with (delta, M0, C0, alpha) = (1, 0.5, 1, 1).
inline ExponentFunction remark1() {
    ExponentFunction f;
    f.name = "remark1";
    f.h = [](double x) { return 1.0 + 0.5 / (1.0 + x); };
    f.h_prime = [](double x) { return -0.5 / ((1.0 + x) * (1.0 + x)); };
    f.h_minus = 1.0;
    f.h_plus = 1.5;
    f.delta = 1.0;
    f.M0 = 0.5;
    f.C0 = 1.0;
    f.alpha = 1.0;
    return f;
}

inline ExponentFunction constant(double c) {
    ExponentFunction f;
    f.name = "constant:" + fmt(c);
    f.h = [c](double) { return c; };
    f.h_prime = [](double) { return 0.0; };
    f.h_minus = c;
    f.h_plus = c;
    f.delta = 1.0;
    f.M0 = 1.0;
    f.C0 = 1.0;
    f.alpha = 1.0;
    f.constant = c;
    return f;
}

/// h(x) = 1 + a/(1+x^k), k >= 1. Default certificate: delta = 1,
/// M0 = C0 = a*k (x^(k-1) <= 1 on (0,1]; x^(k-1)/(1+x^k)^2 <= x^-(k+1)), alpha = k.
inline ExponentFunction rational(double a, double k) {
    if (!(a >= 0.0) || !(k >= 1.0) || !std::isfinite(a) || !std::isfinite(k)) {
        fail(ErrorKind::Domain, "rational exponent needs a >= 0 and k >= 1");
    }
    ExponentFunction f;
    f.name = "rational:" + fmt(a) + "/(1+x^" + fmt(k) + ")";
    f.h = [a, k](double x) { return 1.0 + a / (1.0 + std::pow(x, k)); };
    f.h_prime = [a, k](double x) {
        const double xk = std::pow(x, k);
        return -a * k * std::pow(x, k - 1.0) / ((1.0 + xk) * (1.0 + xk));
    };
    f.h_minus = 1.0;
    f.h_plus = 1.0 + a;
    f.delta = 1.0;
    f.M0 = std::max(a * k, std::numeric_limits<double>::min());
    f.C0 = std::max(a * k, std::numeric_limits<double>::min());
    f.alpha = k;
    if (a == 0.0) f.constant = 1.0;
    return f;
}

inline double parse_number(std::string_view text, std::string_view what) {
    std::string s(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        fail(ErrorKind::Config, "cannot parse number '" + s + "' in " + std::string(what));
    }
    return v;
}

/// Builtins: "remark1", "constant:<c>", "rational:<a>/<1+x^k>" (the
/// denominator may be parenthesised). Anything else is rejected.
inline ExponentFunction parse(std::string_view spec) {
    const std::string s(spec);
    if (s == "remark1") return remark1();
    if (s.rfind("constant:", 0) == 0) return constant(parse_number(s.substr(9), s));
    static const std::regex rational_re(R"(rational:([^/]+)/\(?1\+x\^([^)]+)\)?)");
    std::smatch m;
    if (std::regex_match(s, m, rational_re)) {
        return rational(parse_number(m[1].str(), s), parse_number(m[2].str(), s));
    }
    fail(ErrorKind::Config, "unknown exponent function '" + s + "'");
}

}  // namespace exponent

/// x^{h(x)}
inline double variable_power(const ExponentFunction& f, double x) { return std::pow(x, f.h(x)); }

/// d/dx x^{h(x)} = x^{h-1} (h'(x) x log x + h(x)); exact 1 when h == 1.
inline double variable_power_dx(const ExponentFunction& f, double x) {
    const double hx = f.h(x);
    return std::pow(x, hx - 1.0) * (f.h_prime(x) * x * std::log(x) + hx);
}

/// Log-spaced sampling plan on (0, inf).
struct LogGrid {
    double lo = 1e-8;
    double hi = 1e8;
    std::size_t points = 10000;

    std::vector<double> nodes() const {
        std::vector<double> xs(points);
        const double a = std::log10(lo);
        const double b = std::log10(hi);
        for (std::size_t i = 0; i < points; ++i) {
            const double s = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
            xs[i] = std::pow(10.0, a + s * (b - a));
        }
        xs.front() = lo;
        xs.back() = hi;
        return xs;
    }

    void require_class_s_coverage() const {
        if (!(lo > 0.0) || lo > 1e-8 || hi < 1e8 || points < 10000) {
            fail(ErrorKind::Domain, "class-S grid must cover [1e-8, 1e8] with >= 1e4 log-spaced points");
        }
    }
};

struct HypothesisCheck {
    std::string id;
    bool passed = true;
    std::optional<double> witness_x;
    std::string detail;
};

struct ClassSReport {
    std::string function;
    std::vector<HypothesisCheck> checks;  // h1, h2, h3, h_prime
    /// The h2 limsup is taken over a finite grid.
    std::string h2_label = "grid-certified";

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
    }
    const HypothesisCheck& check(std::string_view id) const {
        for (const auto& c : checks) {
            if (c.id == id) return c;
        }
        fail(ErrorKind::Domain, "no check named " + std::string(id));
    }
};

/// Tolerances of the grid certification.
struct ClassSOptions {
    double limit_tol = 1e-3;        // mean |h-1| over the largest decade
    double tail_growth_slack = 1.01;  // (h-1)log x on the largest decade vs. the rest
    double derivative_rtol = 1e-6;  // h' vs. central difference
};

namespace detail {

inline double central_difference(const ExponentFunction& f, double x, double& roundoff) {
    const double step = std::min(1e-5 * std::max(x, 1.0), 0.5 * x);
    const double up = f.h(x + step);
    const double down = f.h(x - step);
    roundoff = 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(up) + std::abs(down)) / (2.0 * step);
    return (up - down) / (2.0 * step);
}

}  // namespace detail

inline ClassSReport validate_class_s(const ExponentFunction& f, const LogGrid& grid = {},
                                     const ClassSOptions& opt = {}) {
    grid.require_class_s_coverage();
    const auto xs = grid.nodes();
    std::vector<double> hs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        hs[i] = f.h(xs[i]);
        if (!std::isfinite(hs[i]) || hs[i] < 1.0) {
            fail(ErrorKind::Domain, f.name + ": h(" + fmt(xs[i]) + ") = " + fmt(hs[i]) +
                                        " is not a finite value >= 1");
        }
    }

    ClassSReport report;
    report.function = f.name;

    // (h1)
    HypothesisCheck h1{"h1", true, std::nullopt, "1 <= h- <= h(x) <= h+ < inf"};
    if (!(f.h_minus >= 1.0) || !std::isfinite(f.h_plus) || f.h_plus < f.h_minus) {
        h1.passed = false;
        h1.detail = "declared bounds violate 1 <= h- <= h+ < inf";
    } else {
        const double slack = 1e-12;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (hs[i] < f.h_minus - slack || hs[i] > f.h_plus + slack) {
                h1.passed = false;
                h1.witness_x = xs[i];
                h1.detail = "h(x) = " + fmt(hs[i]) + " outside [h-, h+]";
                break;
            }
        }
    }
    report.checks.push_back(h1);

    // (h2): limit 1 on the largest decade, and (h-1)log x stops growing.
    HypothesisCheck h2{"h2", true, std::nullopt, "h -> 1 and (h-1)log x bounded (grid-certified)"};
    {
        const double decade = grid.hi / 10.0;
        const double r_inf = 10.0;
        double mean_dev = 0.0;
        std::size_t n_top = 0;
        double sup_top = -std::numeric_limits<double>::infinity();
        double sup_rest = 0.0;
        std::optional<double> sup_top_x;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double g = (hs[i] - 1.0) * std::log(xs[i]);
            if (xs[i] >= decade) {
                mean_dev += std::abs(hs[i] - 1.0);
                ++n_top;
                if (g > sup_top) {
                    sup_top = g;
                    sup_top_x = xs[i];
                }
            } else if (xs[i] > r_inf) {
                sup_rest = std::max(sup_rest, g);
            }
        }
        mean_dev /= static_cast<double>(std::max<std::size_t>(n_top, 1));
        if (!(mean_dev < opt.limit_tol)) {
            h2.passed = false;
            h2.witness_x = grid.hi;
            h2.detail = "h(x) does not tend to 1: mean |h-1| on the largest decade = " + fmt(mean_dev);
        } else if (sup_top > opt.tail_growth_slack * sup_rest + 1e-12) {
            h2.passed = false;
            h2.witness_x = sup_top_x;
            h2.detail = "(h-1)log x still growing on the largest decade: " + fmt(sup_top) + " > " +
                        fmt(sup_rest);
        }
    }
    report.checks.push_back(h2);

    // (h3)
    HypothesisCheck h3{"h3", true, std::nullopt, "|h'| <= M0 on (0,delta], <= C0 x^-(1+alpha) beyond; h+ < 1+alpha"};
    if (!(f.delta > 0.0 && f.M0 > 0.0 && f.C0 > 0.0 && f.alpha > 0.0)) {
        h3.passed = false;
        h3.detail = "delta, M0, C0, alpha must be positive";
    } else if (!(f.h_plus < 1.0 + f.alpha)) {
        h3.passed = false;
        h3.detail = "h+ = " + fmt(f.h_plus) + " is not < 1 + alpha = " + fmt(1.0 + f.alpha);
    } else {
        for (double x : xs) {
            const double d = std::abs(f.h_prime(x));
            const double cap = x <= f.delta ? f.M0 : f.C0 * std::pow(x, -(1.0 + f.alpha));
            if (!(d <= cap * (1.0 + 1e-12))) {
                h3.passed = false;
                h3.witness_x = x;
                h3.detail = "|h'(x)| = " + fmt(d) + " exceeds " + fmt(cap);
                break;
            }
        }
    }
    report.checks.push_back(h3);

    HypothesisCheck hp{"h_prime", true, std::nullopt, "h' matches a central difference of h"};
    for (double x : xs) {
        double roundoff = 0.0;
        const double fd = detail::central_difference(f, x, roundoff);
        const double exact = f.h_prime(x);
        if (!(std::abs(fd - exact) <= opt.derivative_rtol * std::abs(exact) + roundoff)) {
            hp.passed = false;
            hp.witness_x = x;
            hp.detail = "h'(x) = " + fmt(exact) + " but finite difference gives " + fmt(fd);
            break;
        }
    }
    report.checks.push_back(hp);
    return report;
}

/// Linear-growth certificate x^{h(x)} <= K (1 + x).
struct GrowthCertificate {
    double M_inf = 0.0;   // max of (h-1) log x over grid x > R_inf
    double R_inf = 10.0;
    double K = 1.0;       // 1.01 * max_grid x^h/(1+x), at least 1
    double K_tail = 1.0;  // max(1, e^M_inf): the bound the tail argument alone gives
    double max_ratio = 0.0;
    double argmax_x = 0.0;
};

inline constexpr double kSafetyFactor = 1.01;
inline constexpr double kOverflowGuard = 1e100;

inline GrowthCertificate growth_certificate(const ExponentFunction& f, const LogGrid& grid = {}) {
    GrowthCertificate cert;
    for (double x : grid.nodes()) {
        const double hx = f.h(x);
        const double ratio = std::exp(hx * std::log(x) - std::log1p(x));
        if (!std::isfinite(ratio) || ratio > kOverflowGuard) {
            fail(ErrorKind::Certificate, f.name + ": no finite K bounds x^h(x)/(1+x) at x = " + fmt(x));
        }
        if (ratio > cert.max_ratio) {
            cert.max_ratio = ratio;
            cert.argmax_x = x;
        }
        if (x > cert.R_inf) cert.M_inf = std::max(cert.M_inf, (hx - 1.0) * std::log(x));
    }
    cert.K = std::max(1.0, kSafetyFactor * cert.max_ratio);
    cert.K_tail = std::max(1.0, std::exp(cert.M_inf));
    return cert;
}

/// Grid certificate for the constant L of
///   |mu(t)(x^p(x) - y^p(y))| + |sigma(t)(x^q(x) - y^q(y))| <= L |x - y|.
inline double lipschitz_constant(const ExponentFunction& p, const ExponentFunction& q, double mu_plus,
                                 double sigma_plus, const LogGrid& grid = {}) {
    if (!(mu_plus >= 0.0) || !(sigma_plus >= 0.0)) {
        fail(ErrorKind::Domain, "coefficient bounds must be non-negative");
    }
    double sup_p = 0.0;
    double sup_q = 0.0;
    for (double x : grid.nodes()) {
        sup_p = std::max(sup_p, std::abs(variable_power_dx(p, x)));
        sup_q = std::max(sup_q, std::abs(variable_power_dx(q, x)));
    }
    if (!std::isfinite(sup_p) || !std::isfinite(sup_q) || sup_p > kOverflowGuard || sup_q > kOverflowGuard) {
        fail(ErrorKind::Certificate, "derivative of x^h(x) unbounded on the grid (" + p.name + ", " + q.name + ")");
    }
    return kSafetyFactor * (mu_plus * sup_p + sigma_plus * sup_q);
}

}  // namespace vexsde
