// SPDX-License-Identifier: MIT
#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace vexsde {

enum class ErrorKind {
    Domain,
    Certificate,
    ClassS,
    SchemeMismatch,
    Overflow,
    Shape,
    NonConvergence,
    Plan,
    Singular,
    Timeout,
    Config,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Certificate: return "certificate";
        case ErrorKind::ClassS: return "class-S";
        case ErrorKind::SchemeMismatch: return "scheme-mismatch";
        case ErrorKind::Overflow: return "overflow";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::NonConvergence: return "non-convergence";
        case ErrorKind::Plan: return "plan";
        case ErrorKind::Singular: return "singular-system";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), reason_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix, for re-raising with added context.
    const std::string& reason() const noexcept { return reason_; }

private:
    ErrorKind kind_;
    std::string reason_;
};

/// Short human-readable number for names and messages (std::to_string pads doubles).
template <typename T>
std::string fmt(T v) {
    if constexpr (std::is_integral_v<T>) {
        return std::to_string(v);
    } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", static_cast<double>(v));
        return buf;
    }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace vexsde
