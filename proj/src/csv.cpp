#include "dctdrift/csv.h"

#include "dctdrift/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dctdrift {

namespace {

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = field.find_first_not_of(" \t");
        const auto e = field.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(fmt::format("{}: missing column \"{}\"", source, name), 1);
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const
{
    const std::string& cell = rows.at(row).at(col);
    double value = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (cell.empty() || res.ec != std::errc() || res.ptr != last) {
        throw ParseError(fmt::format("{}:{}: column \"{}\" is not a number: \"{}\"", source, lines.at(row),
                                     header.at(col), cell),
                         lines.at(row));
    }
    return value;
}

CsvTable parse_csv(const std::string& text, const std::string& source)
{
    CsvTable table;
    table.source = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split_fields(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(fmt::format("{}:{}: expected {} fields, found {}", source, lineno, table.header.size(),
                                         fields.size()),
                             lineno);
        }
        table.rows.push_back(std::move(fields));
        table.lines.push_back(lineno);
    }
    if (!have_header) throw ParseError(source + ": missing header row", 1);
    return table;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_csv(ss.str(), path.string());
}

Recording read_recording(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path);
    const std::size_t tc = table.column("t");
    const std::size_t yc = table.column("observed");
    const bool has_known = table.has_column("known");
    const std::size_t kc = has_known ? table.column("known") : 0;

    Recording rec;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const double t = table.number(r, tc);
        const double y = table.number(r, yc);
        if (!std::isfinite(t) || !std::isfinite(y)) {
            throw ParseError(fmt::format("{}:{}: non-finite value", table.source, table.lines[r]), table.lines[r]);
        }
        if (!rec.t.empty() && !(t > rec.t.back())) {
            throw ParseError(fmt::format("{}:{}: timestamps must be strictly increasing", table.source, table.lines[r]),
                             table.lines[r]);
        }
        rec.t.push_back(t);
        rec.observed.push_back(y);
        if (has_known) {
            const double k = table.number(r, kc);
            if (k != 0.0 && k != 1.0) {
                throw ParseError(fmt::format("{}:{}: column \"known\" must be 0 or 1", table.source, table.lines[r]),
                                 table.lines[r]);
            }
            rec.known.push_back(k == 1.0);
        }
    }
    if (rec.t.empty()) throw ParseError(table.source + ": no data rows", 1);
    return rec;
}

std::vector<double> interpolate_linear(const std::vector<double>& t, const std::vector<double>& v,
                                       const std::vector<double>& query)
{
    if (t.empty() || t.size() != v.size()) throw InvalidParameter("interpolation needs matching non-empty inputs");
    std::vector<double> out(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) {
        const double q = query[i];
        if (q <= t.front()) {
            out[i] = v.front();
            continue;
        }
        if (q >= t.back()) {
            out[i] = v.back();
            continue;
        }
        const auto it = std::upper_bound(t.begin(), t.end(), q);
        const std::size_t hi = static_cast<std::size_t>(it - t.begin());
        const std::size_t lo = hi - 1;
        if (q == t[lo]) {
            out[i] = v[lo];
            continue;
        }
        const double frac = (q - t[lo]) / (t[hi] - t[lo]);
        out[i] = v[lo] + frac * (v[hi] - v[lo]);
    }
    return out;
}

} // namespace dctdrift
