#include "dctdrift/eval.h"

#include "dctdrift/csv.h"
#include "dctdrift/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace dctdrift {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what)
{
    if (a != b) {
        throw ShapeMismatch(fmt::format("{}: length mismatch ({} vs {})", what, a, b));
    }
}

} // namespace

double mse(std::span<const double> a, std::span<const double> b)
{
    check_lengths(a.size(), b.size(), "mse");
    if (a.empty()) throw InvalidParameter("mse of empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b)
{
    check_lengths(a.size(), b.size(), "cosine_similarity");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw InvalidParameter("cosine similarity of a zero vector");
    return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double total_variation(std::span<const double> x)
{
    double tv = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) tv += std::abs(x[i] - x[i - 1]);
    return tv;
}

EvalRecord score(const std::string& example_id, const std::string& method, std::span<const double> estimate,
                 std::span<const double> truth)
{
    return {example_id, method, mse(estimate, truth), cosine_similarity(estimate, truth)};
}

double median(std::vector<double> values)
{
    if (values.empty()) throw InvalidParameter("median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::map<std::string, MetricSummary> aggregate(const std::vector<EvalRecord>& records)
{
    if (records.empty()) throw InvalidParameter("cannot aggregate an empty record list");
    std::map<std::string, std::vector<const EvalRecord*>> groups;
    for (const auto& r : records) groups[r.method].push_back(&r);

    std::map<std::string, MetricSummary> out;
    for (auto& [method, group] : groups) {
        // Sum in a canonical order so the result does not depend on record order.
        std::vector<double> m, c;
        for (const auto* r : group) {
            m.push_back(r->mse);
            c.push_back(r->cosine_sim);
        }
        std::sort(m.begin(), m.end());
        std::sort(c.begin(), c.end());
        MetricSummary s;
        s.count = group.size();
        s.mse_avg = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(s.count);
        s.cos_avg = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(s.count);
        s.mse_median = median(m);
        s.cos_median = median(c);
        out[method] = s;
    }
    return out;
}

std::vector<std::string> ordered_methods(const std::map<std::string, MetricSummary>& summary)
{
    std::vector<std::pair<std::size_t, std::string>> pg;
    std::vector<std::string> rest;
    bool has_tcnn = false;
    for (const auto& [method, s] : summary) {
        if (method.rfind("pg-", 0) == 0) {
            pg.emplace_back(std::stoul(method.substr(3)), method);
        } else if (method == kTcnnMethod) {
            has_tcnn = true;
        } else {
            rest.push_back(method);
        }
    }
    std::sort(pg.begin(), pg.end());
    std::vector<std::string> out;
    for (auto& p : pg) out.push_back(p.second);
    if (has_tcnn) out.push_back(kTcnnMethod);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

namespace {

struct Row {
    const char* label;
    double MetricSummary::*field;
};

constexpr Row kRows[] = {
    {"MSE (avg.)", &MetricSummary::mse_avg},
    {"MSE (median)", &MetricSummary::mse_median},
    {"Cos sim (avg.)", &MetricSummary::cos_avg},
    {"Cos sim (median)", &MetricSummary::cos_median},
};

std::string column_label(const std::string& method)
{
    if (method.rfind("pg-", 0) == 0) return "PG B=" + method.substr(3);
    if (method == kTcnnMethod) return "TCNN-DCT";
    return method;
}

} // namespace

std::string format_table_text(const std::map<std::string, MetricSummary>& summary)
{
    const auto methods = ordered_methods(summary);
    std::size_t label_w = 0;
    for (const auto& r : kRows) label_w = std::max(label_w, std::string(r.label).size());
    std::vector<std::size_t> widths;
    for (const auto& m : methods) widths.push_back(std::max<std::size_t>(8, column_label(m).size()));

    std::string out = fmt::format("{:<{}}", "Metric", label_w);
    for (std::size_t j = 0; j < methods.size(); ++j) out += fmt::format(" | {:>{}}", column_label(methods[j]), widths[j]);
    out += '\n';
    for (const auto& r : kRows) {
        out += fmt::format("{:<{}}", r.label, label_w);
        for (std::size_t j = 0; j < methods.size(); ++j) {
            out += fmt::format(" | {:>{}.4f}", summary.at(methods[j]).*r.field, widths[j]);
        }
        out += '\n';
    }
    return out;
}

std::string format_table_csv(const std::map<std::string, MetricSummary>& summary)
{
    const auto methods = ordered_methods(summary);
    std::string out = "metric";
    for (const auto& m : methods) out += "," + m;
    out += '\n';
    for (const auto& r : kRows) {
        out += r.label;
        for (const auto& m : methods) out += fmt::format(",{}", summary.at(m).*r.field);
        out += '\n';
    }
    return out;
}

void write_records_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "example_id,method,mse,cosine_sim\n";
    for (const auto& r : records) os << fmt::format("{},{},{},{}\n", r.example_id, r.method, r.mse, r.cosine_sim);
    if (!os) throw IoError("write failed: " + path.string());
}

std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path);
    const std::size_t id = table.column("example_id");
    const std::size_t method = table.column("method");
    const std::size_t m = table.column("mse");
    const std::size_t c = table.column("cosine_sim");
    std::vector<EvalRecord> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        out.push_back({row[id], row[method], table.number(r, m), table.number(r, c)});
    }
    return out;
}

namespace {

std::string polyline(const TimeSeries& s, double t0, double t1, double lo, double hi, double w, double h, double pad)
{
    std::string pts;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = pad + (t1 > t0 ? (s.time_at(i) - t0) / (t1 - t0) : 0.0) * (w - 2 * pad);
        const double y = pad + (hi > lo ? (hi - s[i]) / (hi - lo) : 0.5) * (h - 2 * pad);
        pts += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", x, y);
    }
    return pts;
}

} // namespace

void emit_overlay(const TimeSeries& observed, const TimeSeries& tcnn, const std::optional<TimeSeries>& pg,
                  const std::filesystem::path& prefix)
{
    check_lengths(observed.size(), tcnn.size(), "overlay");
    if (pg) check_lengths(observed.size(), pg->size(), "overlay");
    if (observed.empty()) throw InvalidParameter("overlay of empty series");

    std::filesystem::path csv_path = prefix;
    csv_path += ".csv";
    {
        std::ofstream os(csv_path, std::ios::binary);
        if (!os) throw IoError("cannot write " + csv_path.string());
        os << "t,observed,tcnn,pg\n";
        for (std::size_t i = 0; i < observed.size(); ++i) {
            const double p = pg ? (*pg)[i] : std::numeric_limits<double>::quiet_NaN();
            os << fmt::format("{},{},{},{}\n", observed.time_at(i), observed[i], tcnn[i], p);
        }
        if (!os) throw IoError("write failed: " + csv_path.string());
    }

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto extend = [&](const TimeSeries& s) {
        for (double v : s.values) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    };
    extend(observed);
    extend(tcnn);
    if (pg) extend(*pg);
    if (!std::isfinite(lo)) lo = hi = 0.0;
    const double t0 = observed.time_at(0), t1 = observed.time_at(observed.size() - 1);
    constexpr double w = 800, h = 300, pad = 20;

    std::filesystem::path svg_path = prefix;
    svg_path += ".svg";
    std::ofstream os(svg_path, std::ios::binary);
    if (!os) throw IoError("cannot write " + svg_path.string());
    os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
                      w, h, w, h);
    os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << fmt::format("  <polyline fill=\"none\" stroke=\"blue\" stroke-width=\"1\" points=\"{}\"/>\n",
                      polyline(observed, t0, t1, lo, hi, w, h, pad));
    os << fmt::format("  <polyline fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"{}\"/>\n",
                      polyline(tcnn, t0, t1, lo, hi, w, h, pad));
    if (pg) {
        os << fmt::format(
            "  <polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\" points=\"{}\"/>\n",
            polyline(*pg, t0, t1, lo, hi, w, h, pad));
    }
    os << "</svg>\n";
    if (!os) throw IoError("write failed: " + svg_path.string());
}

} // namespace dctdrift
