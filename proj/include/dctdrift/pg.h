#pragma once

#include "dctdrift/eval.h"
#include "dctdrift/series.h"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dctdrift {

struct PgConfig {
    std::size_t bandwidth_bins = 8;   // low-pass half-width, in bins of the padded transform
    std::size_t pad_length = 4096;
    std::size_t max_iters = 5000;
    double tol = 1e-9;                // stop when ||x_k - x_{k-1}|| / ||x_k|| < tol

    void validate() const;
};

// true where the recording is gas-free (y = d + v). First and last samples
// must be known.
using KnownMask = std::vector<bool>;

void validate_mask(const KnownMask& mask, std::size_t length);

struct PgResult {
    TimeSeries drift;
    std::size_t iterations = 0;
    bool converged = false;
};

// Called after every iteration with the restored padded buffer.
using PgObserver = std::function<void(std::size_t iteration, std::span<const double> buffer)>;

// Papoulis-Gerchberg extrapolation: alternate the band-limit projection
// (zero every bin above bandwidth_bins of the zero-padded transform) with
// re-imposing the known samples. Everything outside the known samples,
// including the padded tail, is free to move.
PgResult pg_extrapolate(const TimeSeries& y, const KnownMask& mask, const PgConfig& cfg,
                        const PgObserver& observer = {});

// Low-pass projection alone, on a buffer of the padded length.
std::vector<double> lowpass_project(std::span<const double> buffer, std::size_t bandwidth_bins);

std::vector<EvalRecord> sweep_bandwidths(const TimeSeries& y, const KnownMask& mask,
                                         const std::vector<std::size_t>& bandwidths,
                                         const TimeSeries& true_drift, const PgConfig& base,
                                         const std::string& example_id = {});

std::string pg_method_tag(std::size_t bandwidth);

} // namespace dctdrift
