#include "dctdrift/dataset.h"

#include "dctdrift/csv.h"
#include "dctdrift/error.h"
#include "dctdrift/parallel.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dctdrift {

namespace {

using json = nlohmann::json;

std::string example_stem(std::size_t index)
{
    return fmt::format("ex_{:05d}", index);
}

StoredExample to_stored(SyntheticExample&& ex, std::size_t index)
{
    return StoredExample{example_stem(index), std::move(ex.observed), std::move(ex.drift), std::move(ex.response)};
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

// Uniform sample period recovered from the time column.
double infer_period(const std::vector<double>& t, const std::string& source)
{
    if (t.size() < 2) return 1.0;
    const double period = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t n = 1; n < t.size(); ++n) {
        if (std::abs((t[n] - t[n - 1]) - period) > 1e-6 * std::max(1.0, std::abs(period))) {
            throw ParseError(source + ": dataset timestamps are not uniformly spaced", n + 2);
        }
    }
    return period;
}

} // namespace

Normalization training_normalization(const std::vector<StoredExample>& train)
{
    if (train.empty()) throw InvalidParameter("normalization needs at least one training example");
    std::vector<const TimeSeries*> cols;
    cols.reserve(train.size());
    for (const auto& ex : train) cols.push_back(&ex.observed);
    const SeriesStats s = pooled_stats(cols);
    if (!(s.std > 0.0)) throw NumericError("training observations have zero variance; cannot normalize");
    return Normalization{s.mean, s.std};
}

Dataset synthesize_dataset(const DatasetSpec& spec, std::size_t jobs)
{
    spec.validate();
    std::vector<StoredExample> all(spec.count);
    parallel_for(spec.count, jobs, [&](std::size_t i) { all[i] = to_stored(synthesize_example(spec, i), i); });

    Dataset ds;
    const std::size_t n_train = spec.train_count();
    ds.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + n_train));
    ds.val.assign(std::make_move_iterator(all.begin() + n_train), std::make_move_iterator(all.end()));
    ds.manifest.length = spec.length;
    ds.manifest.period = spec.period;
    ds.manifest.seed = spec.seed;
    for (const auto& ex : ds.train) ds.manifest.train_files.push_back(ex.id + ".csv");
    for (const auto& ex : ds.val) ds.manifest.val_files.push_back(ex.id + ".csv");
    ds.manifest.norm = training_normalization(ds.train);
    return ds;
}

void write_example_csv(const std::filesystem::path& path, const StoredExample& ex)
{
    const std::size_t n = ex.observed.size();
    if (ex.drift.size() != n || ex.response.size() != n) {
        throw ShapeMismatch("example " + ex.id + " has columns of different lengths");
    }
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "t,observed,drift,response\n");
    for (std::size_t i = 0; i < n; ++i) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", ex.observed.time_at(i), ex.observed[i], ex.drift[i],
                       ex.response[i]);
    }
    write_text(path, fmt::to_string(buf));
}

StoredExample read_example_csv(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path);
    const std::size_t tc = table.column("t");
    const std::size_t oc = table.column("observed");
    const std::size_t dc = table.column("drift");
    const std::size_t rc = table.column("response");
    if (table.rows.empty()) throw ParseError(table.source + ": no data rows", 1);

    std::vector<double> t;
    StoredExample ex;
    ex.id = path.stem().string();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        t.push_back(table.number(r, tc));
        ex.observed.values.push_back(table.number(r, oc));
        ex.drift.values.push_back(table.number(r, dc));
        ex.response.values.push_back(table.number(r, rc));
    }
    const double period = infer_period(t, table.source);
    for (TimeSeries* s : {&ex.observed, &ex.drift, &ex.response}) {
        s->period = period;
        s->start = t.front();
    }
    return ex;
}

DatasetManifest write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, std::size_t jobs)
{
    Dataset ds = synthesize_dataset(spec, jobs);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<const StoredExample*> all;
    for (const auto& ex : ds.train) all.push_back(&ex);
    for (const auto& ex : ds.val) all.push_back(&ex);
    parallel_for(all.size(), jobs, [&](std::size_t i) { write_example_csv(dir / (all[i]->id + ".csv"), *all[i]); });

    const auto& m = ds.manifest;
    const json doc{
        {"format", "dctdrift-dataset"},
        {"version", 1},
        {"length", m.length},
        {"period", m.period},
        {"seed", m.seed},
        {"train", m.train_files},
        {"validation", m.val_files},
        {"mean", m.norm.mean},
        {"std", m.norm.std},
    };
    write_text(dir / kManifestName, doc.dump(2) + "\n");
    return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir)
{
    const auto path = dir / kManifestName;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    DatasetManifest m;
    try {
        const json doc = json::parse(is);
        if (doc.at("format") != "dctdrift-dataset") throw InvalidParameter(path.string() + ": not a dataset manifest");
        m.length = doc.at("length").get<std::size_t>();
        m.period = doc.at("period").get<double>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.train_files = doc.at("train").get<std::vector<std::string>>();
        m.val_files = doc.at("validation").get<std::vector<std::string>>();
        m.norm.mean = doc.at("mean").get<double>();
        m.norm.std = doc.at("std").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    if (!(m.norm.std > 0.0)) throw InvalidParameter(path.string() + ": std must be positive");
    return m;
}

Dataset read_dataset(const std::filesystem::path& dir)
{
    Dataset ds;
    ds.manifest = read_manifest(dir);
    auto load = [&](const std::vector<std::string>& files, std::vector<StoredExample>& out) {
        for (const auto& f : files) {
            out.push_back(read_example_csv(dir / f));
            if (out.back().observed.size() != ds.manifest.length) {
                throw ShapeMismatch(fmt::format("{}: expected {} samples, found {}", f, ds.manifest.length,
                                                out.back().observed.size()));
            }
        }
    };
    load(ds.manifest.train_files, ds.train);
    load(ds.manifest.val_files, ds.val);
    return ds;
}

std::vector<TrainingPair> training_pairs(const std::vector<StoredExample>& examples, const Normalization& norm)
{
    std::vector<TrainingPair> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        out.push_back({normalize(ex.observed, norm.mean, norm.std).values,
                       normalize(ex.drift, norm.mean, norm.std).values});
    }
    return out;
}

} // namespace dctdrift
