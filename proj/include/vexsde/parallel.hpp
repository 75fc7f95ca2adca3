// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace vexsde {

/// Worker-count cap. threads == 0 means "use the hardware concurrency".
/// Results never depend on this value: work is split by index and reduced
/// in index order afterwards.
struct Execution {
    unsigned threads = 0;

    unsigned resolved() const noexcept {
        if (threads != 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1u : hw;
    }
};

/// Calls body(i) for every i in [0, n). Indices are handed out in contiguous
/// chunks; the first exception (lowest chunk start) is rethrown after join.
template <typename Body>
void parallel_for(std::size_t n, const Execution& exec, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(exec.resolved(), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// A Monte Carlo statistic: sample mean of per-path values with its standard
/// error.
struct McEstimate {
    std::string observable;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// Two-pass mean / standard error over values in index order.
inline McEstimate summarize(std::span<const double> values, std::string observable = {}, std::uint64_t seed = 0) {
    McEstimate est;
    est.observable = std::move(observable);
    est.n_paths = values.size();
    est.seed = seed;
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    est.mean = sum / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.mean) * (v - est.mean);
        est.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return est;
}

}  // namespace vexsde
