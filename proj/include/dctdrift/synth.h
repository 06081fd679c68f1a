#pragma once

#include "dctdrift/series.h"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dctdrift {

// Two-exponential drift: (r0 + eps_r) + rf*exp(-t/(tau_f+eps_f)) + rs*exp(-t/(tau_s+eps_s)).
struct DriftParams {
    double r0 = 1.0;
    double rf = 0.0;
    double rs = 0.0;
    double tau_f = 1.0;
    double tau_s = 1.0;
    double eps_r = 0.0;
    double eps_f = 0.0;
    double eps_s = 0.0;
};

// Arctan response to one exposure starting at t_start and lasting delta_t.
struct ResponseParams {
    double t_start = 0.0;
    double delta_t = 1.0;
    double beta = 1.0;
    double tau = 1.0;
};

// Stationary Gaussian process with covariance exp(-((t1 - t2)/alpha)^2),
// times measured in sample periods.
struct GpDriftParams {
    double alpha = 64.0;
    double mean = 0.0;
    double jitter = 1e-8;
};

struct SyntheticExample {
    TimeSeries observed;
    TimeSeries drift;
    TimeSeries response;
    double noise_sigma = 0.0;
    std::vector<ResponseParams> exposures;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
};

enum class DriftSource { gaussian_process, exponential };

struct DatasetSpec {
    std::size_t count = 15000;
    double val_fraction = 1.0 / 3.0;   // the last round(count * val_fraction) indices form the validation split
    std::size_t length = 512;
    double period = 1.0;
    std::uint64_t seed = 1;
    DriftSource drift_source = DriftSource::gaussian_process;

    IntRange exposure_count{0, 4};
    Interval exposure_duration{24.0, 96.0};   // delta_t, samples
    Interval response_beta{0.02, 0.08};
    Interval response_tau{8.0, 32.0};
    double exposure_gap = 16.0;               // minimum spacing between exposures
    double tail_margin = 64.0;                // exposures end at least this far before the last sample
    Interval noise_sigma{0.0, 0.15};

    Interval gp_alpha{64.0, 64.0};
    Interval gp_mean{-1.0, 1.0};
    double gp_jitter = 1e-8;

    // Exponential drift nominal values; error terms are uniform within
    // +/- eps_fraction of each nominal value.
    Interval drift_r0{0.5, 1.5};
    Interval drift_rf{0.5, 2.0};
    Interval drift_rs{0.5, 2.0};
    Interval drift_tau_f{20.0, 80.0};
    Interval drift_tau_s{200.0, 800.0};
    double eps_fraction = 0.05;

    void validate() const;
    std::size_t val_count() const noexcept;
    std::size_t train_count() const noexcept { return count - val_count(); }
};

double eval_drift(const DriftParams& params, double t);
double eval_response(const ResponseParams& params, double t);

TimeSeries sample_gp_drift(const GpDriftParams& params, std::size_t length, std::uint64_t rng_seed);

SyntheticExample synthesize_example(const DatasetSpec& spec, std::size_t index);

TimeSeries normalize(const TimeSeries& series, double mean, double std);
TimeSeries denormalize(const TimeSeries& series, double mean, double std);

// Linear interpolation onto `target` uniform samples over the same time span.
TimeSeries resample_to_length(const TimeSeries& series, std::size_t target);

// Samples where the analyte response is negligible (|p| <= tol * max|p|);
// the first and last samples are always marked known.
std::vector<bool> gas_free_mask(const TimeSeries& response, double rel_tol = 0.02);

struct SeriesStats {
    double mean = 0.0;
    double std = 1.0;
};

// Pooled mean and population standard deviation over all samples.
SeriesStats pooled_stats(const std::vector<const TimeSeries*>& series);

} // namespace dctdrift
