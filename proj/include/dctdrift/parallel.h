#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dctdrift {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split into
// contiguous chunks; callers write results by index, so output never depends
// on the job count. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
        const std::size_t lo = n * j / jobs, hi = n * (j + 1) / jobs;
        workers.emplace_back([&, lo, hi, j] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace dctdrift
