#include "dctdrift/synth.h"

#include "dctdrift/error.h"
#include "dctdrift/random.h"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <map>
#include <memory>
#include <tuple>

namespace dctdrift {

namespace {

void check_interval(const Interval& iv, const char* name, bool positive = false)
{
    if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
        throw InvalidParameter(std::string("invalid interval for ") + name);
    }
    if (positive && iv.lo <= 0.0) {
        throw InvalidParameter(std::string(name) + " must be positive");
    }
}

double draw(Rng& rng, const Interval& iv)
{
    return iv.lo == iv.hi ? iv.lo : uniform(rng, iv.lo, iv.hi);
}

using LowerFactor = Eigen::MatrixXd;

// Cholesky factors are reused across examples sharing (alpha, length, jitter).
std::shared_ptr<const LowerFactor> gp_factor(double alpha, std::size_t length, double jitter)
{
    static std::mutex mutex;
    static std::map<std::tuple<double, std::size_t, double>, std::shared_ptr<const LowerFactor>> cache;
    const auto key = std::make_tuple(alpha, length, jitter);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const auto n = static_cast<Eigen::Index>(length);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double lag = static_cast<double>(i - j) / alpha;
            cov(i, j) = std::exp(-lag * lag);
        }
        cov(i, i) += jitter;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw FactorizationError("GP covariance is not positive definite (alpha=" + std::to_string(alpha) +
                                 ", jitter=" + std::to_string(jitter) + ")");
    }
    auto factor = std::make_shared<const LowerFactor>(llt.matrixL());
    std::lock_guard<std::mutex> lock(mutex);
    if (cache.size() > 16) cache.clear();
    cache.emplace(key, factor);
    return factor;
}

} // namespace

std::size_t DatasetSpec::val_count() const noexcept
{
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(count) * val_fraction));
    return count > 1 ? std::min(n, count - 1) : 0;
}

void DatasetSpec::validate() const
{
    if (count < 1) throw InvalidParameter("dataset count must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InvalidParameter("val_fraction must lie in [0, 1)");
    if (length < 2) throw InvalidParameter("dataset length must be >= 2");
    if (!(period > 0.0)) throw InvalidParameter("sample period must be positive");
    if (exposure_count.lo < 0 || exposure_count.lo > exposure_count.hi) {
        throw InvalidParameter("invalid exposure count range");
    }
    check_interval(exposure_duration, "exposure_duration", true);
    check_interval(response_beta, "response_beta");
    check_interval(response_tau, "response_tau", true);
    check_interval(noise_sigma, "noise_sigma");
    if (noise_sigma.lo < 0.0) throw InvalidParameter("noise_sigma must be non-negative");
    check_interval(gp_alpha, "gp_alpha", true);
    check_interval(gp_mean, "gp_mean");
    if (!(gp_jitter >= 0.0)) throw InvalidParameter("gp_jitter must be non-negative");
    check_interval(drift_r0, "drift_r0");
    check_interval(drift_rf, "drift_rf");
    check_interval(drift_rs, "drift_rs");
    check_interval(drift_tau_f, "drift_tau_f", true);
    check_interval(drift_tau_s, "drift_tau_s", true);
    if (!(eps_fraction >= 0.0 && eps_fraction < 1.0)) throw InvalidParameter("eps_fraction must lie in [0, 1)");
    if (!(exposure_gap >= 0.0) || !(tail_margin >= 0.0)) throw InvalidParameter("exposure margins must be non-negative");
}

double eval_drift(const DriftParams& p, double t)
{
    const double tf = p.tau_f + p.eps_f;
    const double ts = p.tau_s + p.eps_s;
    if (!(tf > 0.0) || !(ts > 0.0)) {
        throw InvalidParameter("effective drift time constants must be positive");
    }
    return (p.r0 + p.eps_r) + p.rf * std::exp(-t / tf) + p.rs * std::exp(-t / ts);
}

double eval_response(const ResponseParams& p, double t)
{
    if (!(p.tau > 0.0)) throw InvalidParameter("response tau must be positive");
    if (!(p.delta_t > 0.0)) throw InvalidParameter("exposure duration must be positive");
    if (t <= p.t_start) return 0.0;
    const double scale = p.beta * p.tau;
    const double a = (t - p.t_start) / p.tau;
    if (t <= p.t_start + p.delta_t) return scale * std::atan(a);
    // atan(a) - atan(b) for a > b >= 0, written to avoid cancellation at large t.
    const double b = (t - p.t_start - p.delta_t) / p.tau;
    return scale * std::atan((a - b) / (1.0 + a * b));
}

TimeSeries sample_gp_drift(const GpDriftParams& params, std::size_t length, std::uint64_t rng_seed)
{
    if (!(params.alpha > 0.0)) throw InvalidParameter("GP alpha must be positive");
    if (length == 0) throw InvalidParameter("GP length must be positive");
    const auto factor = gp_factor(params.alpha, length, params.jitter);
    Rng rng = make_stream(rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(length));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    const Eigen::VectorXd x = factor->triangularView<Eigen::Lower>() * z;
    std::vector<double> values(length);
    for (std::size_t i = 0; i < length; ++i) values[i] = params.mean + x[static_cast<Eigen::Index>(i)];
    return TimeSeries(std::move(values));
}

namespace {

std::vector<ResponseParams> draw_exposures(const DatasetSpec& spec, Rng& rng)
{
    std::uniform_int_distribution<int> count_dist(spec.exposure_count.lo, spec.exposure_count.hi);
    int count = count_dist(rng);
    std::vector<double> durations;
    for (int i = 0; i < count; ++i) durations.push_back(draw(rng, spec.exposure_duration));

    const double span = static_cast<double>(spec.length - 1) * spec.period;
    const double first = spec.exposure_gap;
    const double last_end = span - spec.tail_margin;
    auto slack_for = [&](std::size_t k) {
        double used = 0.0;
        for (std::size_t i = 0; i < k; ++i) used += durations[i];
        if (k > 1) used += static_cast<double>(k - 1) * spec.exposure_gap;
        return last_end - first - used;
    };
    std::size_t k = durations.size();
    while (k > 0 && slack_for(k) < 0.0) --k;
    durations.resize(k);
    if (k == 0) return {};

    // Uniform placement: sorted offsets partition the free slack.
    const double slack = slack_for(k);
    std::vector<double> offsets(k);
    for (auto& o : offsets) o = uniform(rng, 0.0, slack);
    std::sort(offsets.begin(), offsets.end());

    std::vector<ResponseParams> out(k);
    double cursor = first;
    for (std::size_t i = 0; i < k; ++i) {
        out[i].t_start = cursor + offsets[i];
        out[i].delta_t = durations[i];
        out[i].beta = draw(rng, spec.response_beta);
        out[i].tau = draw(rng, spec.response_tau);
        cursor += durations[i] + spec.exposure_gap;
    }
    return out;
}

DriftParams draw_drift_params(const DatasetSpec& spec, Rng& rng)
{
    DriftParams p;
    p.r0 = draw(rng, spec.drift_r0);
    p.rf = draw(rng, spec.drift_rf);
    p.rs = draw(rng, spec.drift_rs);
    p.tau_f = draw(rng, spec.drift_tau_f);
    p.tau_s = draw(rng, spec.drift_tau_s);
    const double e = spec.eps_fraction;
    auto err = [&](double nominal) {
        const double w = std::abs(nominal) * e;
        return w > 0.0 ? uniform(rng, -w, w) : 0.0;
    };
    p.eps_r = err(p.r0);
    p.eps_f = err(p.tau_f);
    p.eps_s = err(p.tau_s);
    return p;
}

} // namespace

SyntheticExample synthesize_example(const DatasetSpec& spec, std::size_t index)
{
    if (index >= spec.count) {
        throw InvalidParameter("example index " + std::to_string(index) + " out of range");
    }
    Rng rng = make_stream(spec.seed, {static_cast<std::uint64_t>(index)});
    const std::size_t n = spec.length;

    SyntheticExample ex;
    std::vector<double> drift(n);
    if (spec.drift_source == DriftSource::gaussian_process) {
        GpDriftParams gp;
        gp.alpha = draw(rng, spec.gp_alpha);
        gp.mean = draw(rng, spec.gp_mean);
        gp.jitter = spec.gp_jitter;
        drift = sample_gp_drift(gp, n, rng()).values;
    } else {
        const DriftParams p = draw_drift_params(spec, rng);
        for (std::size_t i = 0; i < n; ++i) drift[i] = eval_drift(p, static_cast<double>(i) * spec.period);
    }

    ex.exposures = draw_exposures(spec, rng);
    std::vector<double> response(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * spec.period;
        for (const auto& e : ex.exposures) response[i] += eval_response(e, t);
    }

    ex.noise_sigma = draw(rng, spec.noise_sigma);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> observed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double noise = ex.noise_sigma > 0.0 ? ex.noise_sigma * normal(rng) : 0.0;
        observed[i] = drift[i] + response[i] + noise;
    }

    ex.observed = TimeSeries(std::move(observed), spec.period);
    ex.drift = TimeSeries(std::move(drift), spec.period);
    ex.response = TimeSeries(std::move(response), spec.period);
    return ex;
}

TimeSeries normalize(const TimeSeries& series, double mean, double std)
{
    if (!(std > 0.0)) throw InvalidParameter("normalization std must be positive");
    TimeSeries out = series;
    for (double& v : out.values) v = (v - mean) / std;
    return out;
}

TimeSeries denormalize(const TimeSeries& series, double mean, double std)
{
    if (!(std > 0.0)) throw InvalidParameter("normalization std must be positive");
    TimeSeries out = series;
    for (double& v : out.values) v = v * std + mean;
    return out;
}

TimeSeries resample_to_length(const TimeSeries& series, std::size_t target)
{
    if (series.empty()) throw InvalidParameter("cannot resample an empty series");
    if (target == 0) throw InvalidParameter("resample target must be positive");
    const std::size_t n = series.size();
    if (target == n) return series;

    const double span = static_cast<double>(n - 1) * series.period;
    TimeSeries out;
    out.start = series.start;
    out.period = target > 1 ? span / static_cast<double>(target - 1) : series.period;
    out.values.resize(target);
    if (target == 1 || n == 1) {
        std::fill(out.values.begin(), out.values.end(), series.values.front());
        if (target > 1 && n == 1) out.period = series.period;
        return out;
    }
    // Position i*(n-1)/(target-1) split into integer and fractional parts
    // with integer arithmetic so both endpoints land exactly on samples.
    const std::size_t denom = target - 1;
    for (std::size_t i = 0; i < target; ++i) {
        const std::size_t num = i * (n - 1);
        const std::size_t idx = num / denom;
        const std::size_t rem = num % denom;
        if (rem == 0) {
            out.values[i] = series.values[idx];
        } else {
            const double frac = static_cast<double>(rem) / static_cast<double>(denom);
            out.values[i] = series.values[idx] + frac * (series.values[idx + 1] - series.values[idx]);
        }
    }
    return out;
}

std::vector<bool> gas_free_mask(const TimeSeries& response, double rel_tol)
{
    double peak = 0.0;
    for (double v : response.values) peak = std::max(peak, std::abs(v));
    std::vector<bool> mask(response.size(), true);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < response.size(); ++i) mask[i] = std::abs(response[i]) <= rel_tol * peak;
    }
    if (!mask.empty()) {
        mask.front() = true;
        mask.back() = true;
    }
    return mask;
}

SeriesStats pooled_stats(const std::vector<const TimeSeries*>& series)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* s : series) {
        for (double v : s->values) sum += v;
        n += s->size();
    }
    if (n == 0) throw InvalidParameter("no samples to compute statistics from");
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto* s : series) {
        for (double v : s->values) sq += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(sq / static_cast<double>(n))};
}

} // namespace dctdrift
