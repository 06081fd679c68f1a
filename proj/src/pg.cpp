#include "dctdrift/pg.h"

#include "dctdrift/error.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

namespace dctdrift {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n)
    {
        time_ = fftw_alloc_real(n);
        freq_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard<std::mutex> lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), time_, freq_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq_, time_, FFTW_ESTIMATE);
    }
    ~RealFft()
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
        fftw_free(time_);
        fftw_free(freq_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* time() noexcept { return time_; }

    // In-place low-pass of time(): keeps bins 0..bandwidth (and their mirrors).
    void lowpass(std::size_t bandwidth)
    {
        fftw_execute(forward_);
        const std::size_t half = n_ / 2 + 1;
        for (std::size_t k = bandwidth + 1; k < half; ++k) {
            freq_[k][0] = 0.0;
            freq_[k][1] = 0.0;
        }
        fftw_execute(inverse_);
        const double scale = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) time_[i] *= scale;
    }

private:
    std::size_t n_;
    double* time_ = nullptr;
    fftw_complex* freq_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

// Circular linear interpolation across each run of unknown samples.
void fill_unknown(std::vector<double>& buf, const std::vector<bool>& known)
{
    const std::size_t n = buf.size();
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < n; ++i) {
        if (known[i]) anchors.push_back(i);
    }
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const std::size_t left = anchors[a];
        const std::size_t right = anchors[(a + 1) % anchors.size()];
        const std::size_t gap = (right + n - left) % n; // distance to the next anchor, circularly
        const std::size_t steps = gap == 0 ? n : gap;
        for (std::size_t s = 1; s < steps; ++s) {
            const double frac = static_cast<double>(s) / static_cast<double>(steps);
            buf[(left + s) % n] = buf[left] + frac * (buf[right] - buf[left]);
        }
    }
}

} // namespace

void PgConfig::validate() const
{
    if (pad_length < 2) throw InvalidParameter("PG pad_length must be >= 2");
    if (bandwidth_bins < 1 || 2 * bandwidth_bins >= pad_length) {
        throw InvalidParameter("PG bandwidth must satisfy 1 <= B < pad_length/2 (got B=" +
                               std::to_string(bandwidth_bins) + ", pad_length=" + std::to_string(pad_length) + ")");
    }
    if (max_iters < 1) throw InvalidParameter("PG max_iters must be >= 1");
    if (!(tol > 0.0)) throw InvalidParameter("PG tol must be positive");
}

void validate_mask(const KnownMask& mask, std::size_t length)
{
    if (mask.size() != length) {
        throw InvalidParameter("mask length " + std::to_string(mask.size()) + " does not match signal length " +
                               std::to_string(length));
    }
    if (mask.empty() || !mask.front() || !mask.back()) {
        throw InvalidParameter("mask must mark the first and last samples as known");
    }
}

std::vector<double> lowpass_project(std::span<const double> buffer, std::size_t bandwidth_bins)
{
    RealFft fft(buffer.size());
    std::copy(buffer.begin(), buffer.end(), fft.time());
    fft.lowpass(bandwidth_bins);
    return std::vector<double>(fft.time(), fft.time() + buffer.size());
}

PgResult pg_extrapolate(const TimeSeries& y, const KnownMask& mask, const PgConfig& cfg, const PgObserver& observer)
{
    cfg.validate();
    validate_mask(mask, y.size());
    if (y.size() > cfg.pad_length) {
        throw InvalidParameter("signal length " + std::to_string(y.size()) + " exceeds PG pad_length " +
                               std::to_string(cfg.pad_length));
    }

    const std::size_t n = cfg.pad_length;
    std::vector<bool> known(n, false);
    std::vector<double> buf(n, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        known[i] = mask[i];
        if (mask[i]) buf[i] = y[i];
    }
    fill_unknown(buf, known);

    RealFft fft(n);
    PgResult result;
    std::vector<double> prev = buf;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        std::copy(buf.begin(), buf.end(), fft.time());
        fft.lowpass(cfg.bandwidth_bins);
        double diff = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            buf[i] = known[i] ? y[i] : fft.time()[i];
            const double d = buf[i] - prev[i];
            diff += d * d;
            norm += buf[i] * buf[i];
        }
        result.iterations = it;
        if (observer) observer(it, buf);
        if (norm == 0.0 || std::sqrt(diff) <= cfg.tol * std::sqrt(norm)) {
            result.converged = true;
            break;
        }
        prev = buf;
    }

    result.drift = TimeSeries(std::vector<double>(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(y.size())),
                              y.period, y.start);
    return result;
}

std::string pg_method_tag(std::size_t bandwidth)
{
    return "pg-" + std::to_string(bandwidth);
}

std::vector<EvalRecord> sweep_bandwidths(const TimeSeries& y, const KnownMask& mask,
                                         const std::vector<std::size_t>& bandwidths, const TimeSeries& true_drift,
                                         const PgConfig& base, const std::string& example_id)
{
    if (bandwidths.empty()) throw InvalidParameter("bandwidth sweep needs at least one bandwidth");
    std::vector<EvalRecord> out;
    out.reserve(bandwidths.size());
    for (std::size_t b : bandwidths) {
        PgConfig cfg = base;
        cfg.bandwidth_bins = b;
        const auto res = pg_extrapolate(y, mask, cfg);
        out.push_back(score(example_id, pg_method_tag(b), res.drift.view(), true_drift.view()));
    }
    return out;
}

} // namespace dctdrift
