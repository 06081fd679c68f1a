#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dctdrift {

// Uniformly sampled real-valued signal. Sample n sits at start + n * period.
struct TimeSeries {
    std::vector<double> values;
    double period = 1.0;
    double start = 0.0;

    TimeSeries() = default;
    explicit TimeSeries(std::vector<double> v, double period_ = 1.0, double start_ = 0.0)
        : values(std::move(v)), period(period_), start(start_) {}

    std::size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }
    double time_at(std::size_t n) const noexcept { return start + period * static_cast<double>(n); }
    double& operator[](std::size_t n) { return values[n]; }
    double operator[](std::size_t n) const { return values[n]; }
    std::span<const double> view() const noexcept { return values; }
};

} // namespace dctdrift
