#include "dctdrift/error.h"
#include "dctdrift/eval.h"
#include "dctdrift/model.h"
#include "dctdrift/pg.h"
#include "dctdrift/synth.h"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dctdrift;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a)
{
    if (a.ndim() != 1) throw ShapeMismatch("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v)
{
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict example_dict(const SyntheticExample& ex)
{
    py::dict d;
    d["observed"] = to_array(ex.observed.values);
    d["drift"] = to_array(ex.drift.values);
    d["response"] = to_array(ex.response.values);
    d["noise_sigma"] = ex.noise_sigma;
    d["period"] = ex.observed.period;
    return d;
}

struct LoadedModel {
    Checkpoint ckpt;
    TcnnDct model;

    explicit LoadedModel(Checkpoint c) : ckpt(std::move(c)), model(model_from_checkpoint(ckpt)) {}
};

} // namespace

PYBIND11_MODULE(_dctdrift, m)
{
    m.doc() = "Sensor drift estimation with a causal TCN and a sliding DCT shrinkage layer";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidParameter>(m, "InvalidParameter", base.ptr());
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<CorruptCheckpoint>(m, "CorruptCheckpoint", base.ptr());
    py::register_exception<VersionMismatch>(m, "VersionMismatch", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    m.def(
        "synthesize_example",
        [](std::uint64_t seed, std::size_t index, std::size_t length, double period) {
            DatasetSpec spec;
            spec.seed = seed;
            spec.length = length;
            spec.period = period;
            spec.count = std::max<std::size_t>(spec.count, index + 1);
            return example_dict(synthesize_example(spec, index));
        },
        "Synthetic example `index` of the dataset with the given seed", py::arg("seed") = 1, py::arg("index") = 0,
        py::arg("length") = 512, py::arg("period") = 1.0);

    m.def(
        "pg_extrapolate",
        [](const Array& y, const std::vector<bool>& known, std::size_t bandwidth_bins, std::size_t pad_length,
           std::size_t max_iters, double tol) {
            PgConfig cfg;
            cfg.bandwidth_bins = bandwidth_bins;
            cfg.pad_length = pad_length;
            cfg.max_iters = max_iters;
            cfg.tol = tol;
            const auto r = pg_extrapolate(TimeSeries(to_vector(y)), known, cfg);
            return py::make_tuple(to_array(r.drift.values), r.iterations, r.converged);
        },
        "Papoulis-Gerchberg reconstruction; returns (drift, iterations, converged)", py::arg("y"), py::arg("known"),
        py::arg("bandwidth_bins") = 8, py::arg("pad_length") = 4096, py::arg("max_iters") = 5000,
        py::arg("tol") = 1e-9);

    m.def(
        "mse", [](const Array& a, const Array& b) { return mse(to_vector(a), to_vector(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "cosine_similarity",
        [](const Array& a, const Array& b) { return cosine_similarity(to_vector(a), to_vector(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "total_variation", [](const Array& x) { return total_variation(to_vector(x)); }, py::arg("x"));

    py::class_<LoadedModel>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& p) { return LoadedModel(load_checkpoint(p)); }, py::arg("path"))
        .def_static(
            "untrained",
            [](std::size_t channels, std::vector<std::size_t> dilations, std::size_t dct_window, std::uint64_t seed) {
                Checkpoint c;
                c.spec.channels = channels;
                c.spec.block_dilations = std::move(dilations);
                c.spec.dct_window = dct_window;
                c.params = TcnnDct(c.spec, seed).params();
                return LoadedModel(std::move(c));
            },
            py::arg("channels") = 64, py::arg("dilations") = ModelSpec{}.block_dilations,
            py::arg("dct_window") = 64, py::arg("seed") = 1)
        .def_property_readonly("receptive_field",
                               [](const LoadedModel& l) { return l.ckpt.spec.receptive_field(); })
        .def_property_readonly("sequence_length", [](const LoadedModel& l) { return l.ckpt.meta.sequence_length; })
        .def_property_readonly("normalization",
                               [](const LoadedModel& l) { return py::make_tuple(l.ckpt.norm.mean, l.ckpt.norm.std); })
        .def(
            "estimate",
            [](const LoadedModel& l, const Array& observed) {
                const auto est = estimate_drift(l.model, TimeSeries(to_vector(observed)), l.ckpt.norm);
                return py::make_tuple(to_array(est.drift.values), to_array(est.corrected.values));
            },
            "Drift and corrected signal for a uniformly sampled series", py::arg("observed"));
}
