// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vexsde/errors.hpp"

namespace vexsde {

/// Thomas algorithm for lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i].
/// lower[0] and upper[n-1] are ignored.
template <typename Real>
std::vector<Real> solve_tridiagonal(std::span<const Real> lower, std::span<const Real> diag,
                                    std::span<const Real> upper, std::span<const Real> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
        fail(ErrorKind::Shape, "tridiagonal system bands disagree in length");
    }
    std::vector<Real> c(n), d(n), u(n);
    Real pivot = diag[0];
    if (pivot == Real(0) || !std::isfinite(static_cast<double>(pivot))) {
        fail(ErrorKind::Singular, "zero pivot at row 0");
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * c[i - 1];
        if (pivot == Real(0) || !std::isfinite(static_cast<double>(pivot))) {
            fail(ErrorKind::Singular, "zero pivot at row " + fmt(i));
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    u[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) u[i] = d[i] - c[i] * u[i + 1];
    return u;
}

/// max_i |A u - rhs|_i for the same banded matrix.
template <typename Real>
Real tridiagonal_residual(std::span<const Real> lower, std::span<const Real> diag, std::span<const Real> upper,
                          std::span<const Real> rhs, std::span<const Real> u) {
    const std::size_t n = diag.size();
    Real worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Real r = diag[i] * u[i] - rhs[i];
        if (i > 0) r += lower[i] * u[i - 1];
        if (i + 1 < n) r += upper[i] * u[i + 1];
        worst = std::max(worst, static_cast<Real>(std::abs(r)));
    }
    return worst;
}

}  // namespace vexsde
