#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dctdrift {

// Comma-separated, header row required, '.' decimal point. Rows keep their
// 1-based source line so errors can point at the file.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;
    std::string source;

    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);

// A sensor recording: strictly increasing timestamps with one value each,
// plus an optional gas-free mask.
struct Recording {
    std::vector<double> t;
    std::vector<double> observed;
    std::vector<bool> known;
};

// Requires columns "t" and "observed"; "known" (0/1) is optional.
Recording read_recording(const std::filesystem::path& path);

// Piecewise-linear interpolation of (t, v) at the query times. Queries
// outside [t.front(), t.back()] clamp to the end values.
std::vector<double> interpolate_linear(const std::vector<double>& t, const std::vector<double>& v,
                                       const std::vector<double>& query);

} // namespace dctdrift
