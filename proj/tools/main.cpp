#include "dctdrift/config.h"
#include "dctdrift/csv.h"
#include "dctdrift/dataset.h"
#include "dctdrift/error.h"
#include "dctdrift/eval.h"
#include "dctdrift/model.h"
#include "dctdrift/parallel.h"
#include "dctdrift/pg.h"
#include "dctdrift/synth.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <optional>

using namespace dctdrift;
namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kValidation = 2, kIo = 3, kNumeric = 4 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out;
};

Config load(const Globals& g)
{
    Config cfg = g.config.empty() ? Config{} : load_config(g.config);
    if (g.seed) {
        cfg.dataset.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (g.jobs == 0) throw InvalidParameter("--jobs must be >= 1");
    cfg.train.jobs = g.jobs;
    cfg.validate();
    return cfg;
}

fs::path out_or(const Globals& g, const fs::path& fallback)
{
    return g.out.empty() ? fallback : fs::path(g.out);
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

void ensure_parent(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

fs::path with_suffix(fs::path prefix, const std::string& suffix)
{
    prefix += suffix;
    return prefix;
}

// Uniform grid of n samples over [t.front(), t.back()].
TimeSeries uniform_resample(const std::vector<double>& t, const std::vector<double>& v, std::size_t n)
{
    TimeSeries s;
    s.start = t.front();
    s.period = n > 1 ? (t.back() - t.front()) / static_cast<double>(n - 1) : 1.0;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = s.time_at(i);
    if (n > 1) grid.back() = t.back();
    s.values = interpolate_linear(t, v, grid);
    return s;
}

std::vector<double> grid_times(const TimeSeries& s)
{
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s.time_at(i);
    return out;
}

void write_estimate_csv(const fs::path& path, const std::vector<double>& t, const std::vector<double>& observed,
                        const std::vector<double>& drift)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "t,observed,drift_estimate,corrected\n");
    for (std::size_t i = 0; i < t.size(); ++i) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", t[i], observed[i], drift[i], observed[i] - drift[i]);
    }
    write_file(path, fmt::to_string(buf));
}

KnownMask mask_for(const Recording& rec, const Config& cfg)
{
    if (!rec.known.empty()) return rec.known;
    if (cfg.pg_exposures.empty()) {
        throw InvalidParameter("PG needs a \"known\" column in the CSV or [pg] exposures in the config");
    }
    KnownMask mask(rec.t.size(), true);
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        for (const auto& iv : cfg.pg_exposures) {
            if (rec.t[i] >= iv.lo && rec.t[i] <= iv.hi) mask[i] = false;
        }
    }
    return mask;
}

int cmd_synth(const Globals& g)
{
    const Config cfg = load(g);
    const fs::path dir = out_or(g, cfg.paths.dataset);
    const auto m = write_dataset(cfg.dataset, dir, g.jobs);
    fmt::print("wrote {} examples ({} train, {} validation) to {}\n", m.train_files.size() + m.val_files.size(),
               m.train_files.size(), m.val_files.size(), dir.string());
    fmt::print("mean {} std {}\n", m.norm.mean, m.norm.std);
    return kOk;
}

int cmd_train(const Globals& g, const std::string& dataset_arg, const std::string& resume_arg,
              const std::string& metrics_arg)
{
    const Config cfg = load(g);
    const fs::path dir = dataset_arg.empty() ? cfg.paths.dataset : fs::path(dataset_arg);
    const fs::path ckpt_path = out_or(g, cfg.paths.checkpoint);
    const fs::path metrics_path = metrics_arg.empty() ? with_suffix(ckpt_path, ".metrics.csv") : fs::path(metrics_arg);

    const Dataset ds = read_dataset(dir);
    std::optional<Checkpoint> resume;
    if (!resume_arg.empty()) resume = load_checkpoint(resume_arg);
    const Normalization norm = resume ? resume->norm : ds.manifest.norm;
    const auto train_set = training_pairs(ds.train, norm);
    const auto val_set = training_pairs(ds.val, norm);

    const auto result = train(train_set, val_set, cfg.model, cfg.train, norm, resume ? &*resume : nullptr,
                              [](const EpochMetrics& m) {
                                  fmt::print("epoch {:3d}  train {:.6g}  val {:.6g}\n", m.epoch, m.train_loss,
                                             m.val_loss);
                                  std::fflush(stdout);
                              });
    ensure_parent(ckpt_path);
    save_checkpoint(result.checkpoint, ckpt_path);
    ensure_parent(metrics_path);
    write_metrics_csv(metrics_path, result.history);
    fmt::print("checkpoint {} (best epoch {}, val {})\n", ckpt_path.string(), result.checkpoint.meta.best_epoch,
               result.checkpoint.meta.val_loss);
    return kOk;
}

int cmd_estimate(const Globals& g, const std::string& ckpt_arg, const std::string& input, bool plot)
{
    const Config cfg = load(g);
    const Checkpoint ckpt = load_checkpoint(ckpt_arg.empty() ? cfg.paths.checkpoint : fs::path(ckpt_arg));
    const TcnnDct model = model_from_checkpoint(ckpt);
    const Recording rec = read_recording(input);
    const fs::path prefix = out_or(g, fs::path(input).replace_extension("").string() + "_drift");

    const std::size_t n = rec.t.size() == 1 ? 1 : ckpt.meta.sequence_length;
    const TimeSeries resampled = uniform_resample(rec.t, rec.observed, n);
    const DriftEstimate est = estimate_drift(model, resampled, ckpt.norm);
    const std::vector<double> drift = interpolate_linear(grid_times(resampled), est.drift.values, rec.t);

    ensure_parent(prefix);
    write_estimate_csv(with_suffix(prefix, ".csv"), rec.t, rec.observed, drift);
    if (plot) emit_overlay(resampled, est.drift, std::nullopt, with_suffix(prefix, "_overlay"));
    fmt::print("wrote {}\n", with_suffix(prefix, ".csv").string());
    return kOk;
}

int cmd_pg(const Globals& g, const std::string& input, std::optional<std::size_t> bandwidth)
{
    Config cfg = load(g);
    if (bandwidth) cfg.pg.bandwidth_bins = *bandwidth;
    cfg.pg.validate();
    const Recording rec = read_recording(input);
    const KnownMask mask = mask_for(rec, cfg);
    const fs::path prefix = out_or(g, fs::path(input).replace_extension("").string() + "_pg");

    TimeSeries y;
    y.values = rec.observed;
    const PgResult res = pg_extrapolate(y, mask, cfg.pg);
    ensure_parent(prefix);
    write_estimate_csv(with_suffix(prefix, ".csv"), rec.t, rec.observed, res.drift.values);
    fmt::print("wrote {} ({} iterations, {})\n", with_suffix(prefix, ".csv").string(), res.iterations,
               res.converged ? "converged" : "iteration limit reached");
    return kOk;
}

void print_and_write_tables(const std::vector<EvalRecord>& records, const fs::path& dir)
{
    const auto summary = aggregate(records);
    const std::string text = format_table_text(summary);
    fmt::print("{}", text);
    write_file(dir / "table.txt", text);
    write_file(dir / "table.csv", format_table_csv(summary));
}

int cmd_bench(const Globals& g, const std::string& dataset_arg, const std::string& ckpt_arg)
{
    const Config cfg = load(g);
    const fs::path dir = dataset_arg.empty() ? cfg.paths.dataset : fs::path(dataset_arg);
    const fs::path out = out_or(g, cfg.paths.out);
    const Dataset ds = read_dataset(dir);
    if (ds.val.empty()) throw InvalidParameter(dir.string() + ": dataset has no validation split");
    const Checkpoint ckpt = load_checkpoint(ckpt_arg.empty() ? cfg.paths.checkpoint : fs::path(ckpt_arg));
    const TcnnDct model = model_from_checkpoint(ckpt);
    const Normalization& norm = ckpt.norm;

    std::vector<std::vector<EvalRecord>> per_example(ds.val.size());
    std::vector<TimeSeries> tcnn(ds.val.size());
    std::vector<TimeSeries> pg_best(ds.val.size());
    const std::size_t plot_bw = cfg.pg.bandwidth_bins;
    parallel_for(ds.val.size(), g.jobs, [&](std::size_t i) {
        const auto& ex = ds.val[i];
        const KnownMask mask = gas_free_mask(ex.response);
        tcnn[i] = estimate_drift(model, ex.observed, norm).drift;
        auto& recs = per_example[i];
        auto add = [&](const std::string& method, const TimeSeries& est) {
            if (cfg.eval.normalized_metrics) {
                recs.push_back(score(ex.id, method, normalize(est, norm.mean, norm.std).values,
                                     normalize(ex.drift, norm.mean, norm.std).values));
            } else {
                recs.push_back(score(ex.id, method, est.values, ex.drift.values));
            }
        };
        for (std::size_t b : cfg.pg_bandwidths) {
            PgConfig pc = cfg.pg;
            pc.bandwidth_bins = b;
            const PgResult r = pg_extrapolate(ex.observed, mask, pc);
            add(pg_method_tag(b), r.drift);
            if (b == plot_bw) pg_best[i] = r.drift;
        }
        add(kTcnnMethod, tcnn[i]);
    });

    std::vector<EvalRecord> records;
    for (auto& r : per_example) records.insert(records.end(), r.begin(), r.end());
    fs::create_directories(out);
    write_records_csv(out / "records.csv", records);
    print_and_write_tables(records, out);
    for (std::size_t i = 0; i < std::min(cfg.eval.overlays, ds.val.size()); ++i) {
        std::optional<TimeSeries> pg;
        if (!pg_best[i].empty()) pg = pg_best[i];
        emit_overlay(ds.val[i].observed, tcnn[i], pg, out / ("overlay_" + ds.val[i].id));
    }
    fmt::print("wrote {} records to {}\n", records.size(), (out / "records.csv").string());
    return kOk;
}

int cmd_report(const Globals& g, const std::string& records_path)
{
    const Config cfg = load(g);
    const fs::path out = out_or(g, cfg.paths.out);
    const auto records = read_records_csv(records_path);
    fs::create_directories(out);
    print_and_write_tables(records, out);
    return kOk;
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::validation:
        return kValidation;
    case ErrorKind::io:
        return kIo;
    case ErrorKind::numeric:
        return kNumeric;
    }
    return kUnexpected;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Drift estimation for chemical-sensor time series (TCNN-DCT and Papoulis-Gerchberg)"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override dataset and training seeds");
    app.add_option("--jobs", g.jobs, "Worker threads (output does not depend on it)");
    app.add_option("--out", g.out, "Output path (directory, checkpoint, or file prefix)");

    std::string dataset, checkpoint, resume, metrics, input, records;
    std::optional<std::size_t> bandwidth;
    bool plot = false;

    auto* synth = app.add_subcommand("synth", "Synthesize a training/validation dataset");
    auto* trn = app.add_subcommand("train", "Train a model on a dataset");
    trn->add_option("--dataset", dataset, "Dataset directory");
    trn->add_option("--resume", resume, "Continue from this checkpoint");
    trn->add_option("--metrics", metrics, "Epoch metrics CSV (default: <checkpoint>.metrics.csv)");
    auto* est = app.add_subcommand("estimate", "Estimate the drift of a CSV recording");
    est->add_option("input", input, "CSV with columns t, observed")->required();
    est->add_option("--checkpoint", checkpoint, "Trained checkpoint");
    est->add_flag("--plot", plot, "Also write an SVG overlay");
    auto* pg = app.add_subcommand("pg", "Papoulis-Gerchberg drift estimate of a CSV recording");
    pg->add_option("input", input, "CSV with columns t, observed and optionally known")->required();
    pg->add_option("--bandwidth", bandwidth, "Low-pass half-width in bins of the padded transform");
    auto* bench = app.add_subcommand("bench", "Compare TCNN-DCT with the PG sweep on the validation split");
    bench->add_option("--dataset", dataset, "Dataset directory");
    bench->add_option("--checkpoint", checkpoint, "Trained checkpoint");
    auto* report = app.add_subcommand("report", "Aggregate a per-example records CSV into tables");
    report->add_option("records", records, "records.csv written by bench")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (*synth) return cmd_synth(g);
        if (*trn) return cmd_train(g, dataset, resume, metrics);
        if (*est) return cmd_estimate(g, checkpoint, input, plot);
        if (*pg) return cmd_pg(g, input, bandwidth);
        if (*bench) return cmd_bench(g, dataset, checkpoint);
        if (*report) return cmd_report(g, records);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUnexpected;
    }
    return kUnexpected;
}
