#pragma once

#include "dctdrift/model.h"
#include "dctdrift/synth.h"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dctdrift {

struct DatasetManifest {
    std::size_t length = 0;
    double period = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_files;
    std::vector<std::string> val_files;
    Normalization norm;   // pooled over the observed column of the training split
};

struct StoredExample {
    std::string id;       // file stem
    TimeSeries observed;
    TimeSeries drift;
    TimeSeries response;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<StoredExample> train;
    std::vector<StoredExample> val;
};

inline constexpr const char* kManifestName = "manifest.json";

// Synthesizes every example of `spec` into one CSV each (t, observed,
// drift, response) plus manifest.json. Files are bitwise reproducible for
// any job count.
DatasetManifest write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, std::size_t jobs = 1);

// Synthesizes in memory, without touching the file system.
Dataset synthesize_dataset(const DatasetSpec& spec, std::size_t jobs = 1);

Dataset read_dataset(const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);

void write_example_csv(const std::filesystem::path& path, const StoredExample& ex);
StoredExample read_example_csv(const std::filesystem::path& path);

// Observed and drift columns normalized with the same constants.
std::vector<TrainingPair> training_pairs(const std::vector<StoredExample>& examples, const Normalization& norm);

Normalization training_normalization(const std::vector<StoredExample>& train);

} // namespace dctdrift
