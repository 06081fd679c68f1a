#pragma once

#include "dctdrift/series.h"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dctdrift {

struct EvalRecord {
    std::string example_id;
    std::string method; // "tcnn-dct" or "pg-<B>"
    double mse = 0.0;
    double cosine_sim = 0.0;
};

inline constexpr const char* kTcnnMethod = "tcnn-dct";

double mse(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double total_variation(std::span<const double> x);

EvalRecord score(const std::string& example_id, const std::string& method, std::span<const double> estimate,
                 std::span<const double> truth);

struct MetricSummary {
    std::size_t count = 0;
    double mse_avg = 0.0;
    double mse_median = 0.0;
    double cos_avg = 0.0;
    double cos_median = 0.0;
};

// Keyed by method tag.
std::map<std::string, MetricSummary> aggregate(const std::vector<EvalRecord>& records);

double median(std::vector<double> values);

// Column order: PG bandwidths ascending, then TCNN-DCT, then anything else.
std::vector<std::string> ordered_methods(const std::map<std::string, MetricSummary>& summary);

std::string format_table_text(const std::map<std::string, MetricSummary>& summary);
std::string format_table_csv(const std::map<std::string, MetricSummary>& summary);

void write_records_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path);

// Writes <prefix>.svg and <prefix>.csv (t, observed, tcnn, pg). A missing PG
// series is written as nan and left out of the plot.
void emit_overlay(const TimeSeries& observed, const TimeSeries& tcnn, const std::optional<TimeSeries>& pg,
                  const std::filesystem::path& prefix);

} // namespace dctdrift
