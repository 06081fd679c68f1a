#pragma once

#include "dctdrift/nn.h"
#include "dctdrift/series.h"
#include "dctdrift/transforms.h"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dctdrift {

struct ModelSpec {
    std::size_t initial_kernel = 5;
    std::vector<std::size_t> block_dilations{2, 4, 8, 16, 32, 64, 128};
    std::size_t channels = 64;
    double dropout_rate = 0.2;
    std::size_t dct_window = 64;
    std::size_t dilated_kernel = 3;

    void validate() const;
    std::size_t receptive_field() const;
    bool operator==(const ModelSpec&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 80;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double tv_lambda = 0.1;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    void validate() const;
};

struct Normalization {
    double mean = 0.0;
    double std = 1.0;
};

// Causal TCN with a sliding-window DCT soft-threshold layer ahead of a 1x1
// output convolution:
//   conv(1->C, K0) -> blocks [conv(r) relu dropout conv(r) relu + skip] -> dct -> conv(C->1, 1)
class TcnnDct {
public:
    // Fresh He-uniform weights, except the second convolution of each block,
    // which starts at zero like every bias and threshold.
    TcnnDct(ModelSpec spec, std::uint64_t seed);
    TcnnDct(ModelSpec spec, nn::ParamStore params);

    const ModelSpec& spec() const noexcept { return spec_; }
    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }

    // input: [B x 1 x T] normalized signal; returns the [B x 1 x T] drift
    // node. backward() on the tape adds parameter gradients into params().
    nn::VarId forward(nn::Tape& tape, nn::VarId input, bool training, Rng* rng);
    // Same graph, but parameter gradients stay on the tape
    // (Tape::parameter_grads), so concurrent callers never write the store.
    nn::VarId forward_detached(nn::Tape& tape, nn::VarId input, bool training, Rng* rng) const;

    // Evaluation-mode forward of one normalized sequence.
    std::vector<double> predict(std::span<const double> normalized) const;

private:
    nn::VarId build(nn::Tape& tape, nn::VarId input, bool training, Rng* rng,
                    const std::function<nn::VarId(const std::string&)>& bind) const;

    ModelSpec spec_;
    nn::ParamStore params_;
    DctWindow dct_;
};

// Sum of squared errors plus lambda * total variation of the estimate,
// summed over every sequence (last axis is time).
nn::VarId drift_loss(nn::Tape& tape, nn::VarId estimate, std::span<const double> target, double tv_lambda);
double drift_loss(std::span<const double> estimate, std::span<const double> target, double tv_lambda);

struct DriftEstimate {
    TimeSeries drift;
    TimeSeries corrected; // observed - drift
};

DriftEstimate estimate_drift(const TcnnDct& model, const TimeSeries& observed, const Normalization& norm);

struct CheckpointMeta {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    double tv_lambda = 0.1;
    std::size_t sequence_length = 512;   // inputs are resampled to this length at inference
};

struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    ModelSpec spec;
    nn::ParamStore params; // includes optimizer moments and step count
    Normalization norm;
    CheckpointMeta meta;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

TcnnDct model_from_checkpoint(const Checkpoint& ckpt);

// One normalized training pair.
struct TrainingPair {
    std::vector<double> observed;
    std::vector<double> drift;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch Adam on the mean per-sequence loss. Keeps the parameters with
// the lowest validation loss (training loss when there is no validation
// split). With `resume`, continues from its parameters and optimizer state.
TrainResult train(const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const ModelSpec& spec, const TrainConfig& cfg, const Normalization& norm,
                  const Checkpoint* resume = nullptr, const EpochCallback& on_epoch = {});

// Mean loss over a set, evaluation mode.
double evaluate_loss(const TcnnDct& model, const std::vector<TrainingPair>& set, double tv_lambda,
                     std::size_t jobs = 1);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history);

} // namespace dctdrift
