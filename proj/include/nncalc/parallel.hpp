#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <vector>

namespace nncalc {

// Runs fn(i) for i in [0, n) and returns the results in index order. The
// OpenMP version rethrows the lowest-index exception after the loop, so both
// versions fail identically.
namespace serial {

template <typename F>
auto run_trials(std::size_t n, F&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    std::vector<decltype(fn(std::size_t{}))> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
}

}  // namespace serial

namespace omp {

template <typename F>
auto run_trials(std::size_t n, F&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            slots[static_cast<std::size_t>(i)].emplace(fn(static_cast<std::size_t>(i)));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace omp

}  // namespace nncalc
