#pragma once

#include "dctdrift/model.h"
#include "dctdrift/pg.h"
#include "dctdrift/synth.h"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dctdrift {

struct EvalConfig {
    bool normalized_metrics = false;   // score on normalized instead of physical units
    std::size_t overlays = 3;          // validation examples to plot in bench
};

struct PathsConfig {
    std::filesystem::path dataset = "data";
    std::filesystem::path checkpoint = "model.ckpt";
    std::filesystem::path out = "out";
};

struct Config {
    DatasetSpec dataset;
    ModelSpec model;
    TrainConfig train;
    PgConfig pg;
    std::vector<std::size_t> pg_bandwidths{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    std::vector<Interval> pg_exposures;   // [start, end] times treated as unknown when a CSV has no "known" column
    EvalConfig eval;
    PathsConfig paths;

    void validate() const;
};

// INI-style text:
//
//   [dataset]
//   count = 1500
//   noise_sigma = 0, 0.15
//   [model]
//   block_dilations = 2, 4, 8
//   [pg]
//   exposures = 120:180, 300:340
//
// Sections: dataset, model, train, pg, eval, paths. Keys left out keep their
// defaults; unknown sections or keys are rejected by name.
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);

// Every key with its current value, in the same format.
std::string format_config(const Config& cfg);

} // namespace dctdrift
