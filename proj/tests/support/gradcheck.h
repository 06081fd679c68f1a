#pragma once

#include "dctdrift/model.h"
#include "dctdrift/random.h"
#include "reference.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace dctdrift::testing {

inline double relative_error(double analytic, double numeric, double floor)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckReport {
    std::size_t checked = 0;
    std::size_t skipped = 0;    // a kink lies within +-kink_h
    std::size_t fallback = 0;   // checked at kink_h because a kink lies within +-h
    double worst = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double reference_gap = 0.0;   // |library loss - reference loss| / |reference loss|
    std::vector<std::string> params_seen;
};

struct GradCheckOptions {
    std::size_t length = 128;
    double tv_lambda = 0.1;
    double h = 1e-4;
    double kink_h = 1e-6;
    double floor = 1e-6;
    std::size_t max_per_param = 0;   // 0 checks every coordinate
    std::uint64_t seed = 7;
};

// Model with random biases, random residual weights and strictly positive
// thresholds so that every kink type is exercised.
inline TcnnDct gradcheck_model(const ModelSpec& spec, std::uint64_t seed)
{
    TcnnDct model(spec, seed);
    Rng rng = make_stream(seed, {0xb1a5});
    std::uniform_real_distribution<double> bias(-0.1, 0.1), thr(0.05, 0.5);
    for (auto& [name, p] : model.params().entries()) {
        if (name == "dct.threshold") {
            for (double& v : p.tensor.data()) v = thr(rng);
        } else if (name.ends_with(".bias")) {
            for (double& v : p.tensor.data()) v = bias(rng);
        } else if (name.ends_with(".conv2.weight")) {
            const double bound = std::sqrt(6.0 / static_cast<double>(p.tensor.dim(1) * p.tensor.dim(2)));
            std::uniform_real_distribution<double> w(-bound, bound);
            for (double& v : p.tensor.data()) v = w(rng);
        }
    }
    return model;
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

inline GradCheckReport check_model_gradients(const ModelSpec& spec, const GradCheckOptions& opt)
{
    TcnnDct model = gradcheck_model(spec, opt.seed);
    Rng rng = make_stream(opt.seed, {0x1a7a});
    std::normal_distribution<double> normal;
    std::vector<double> input(opt.length), target(opt.length);
    for (double& v : input) v = normal(rng);
    double walk = 0.0;
    for (double& v : target) v = (walk += 0.1 * normal(rng));

    auto library_loss = [&] { return drift_loss(model.predict(input), target, opt.tv_lambda); };

    model.params().zero_grad();
    {
        nn::Tape tape;
        const auto in = tape.constant(nn::Tensor({1, 1, opt.length}, input));
        const auto out = model.forward(tape, in, false, nullptr);
        const auto loss = drift_loss(tape, out, target, opt.tv_lambda);
        nn::backward(tape, loss);
    }

    GradCheckReport report;
    const ReferenceResult base = reference_forward(spec, model.params(), input, target, opt.tv_lambda);
    report.reference_gap = std::abs(library_loss() - base.loss) / std::abs(base.loss);

    for (auto& [name, p] : model.params().entries()) {
        report.params_seen.push_back(name);
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        std::vector<std::size_t> coords(p.tensor.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (opt.max_per_param && coords.size() > opt.max_per_param) {
            Rng pick = make_stream(opt.seed, {fnv1a(name)});
            std::shuffle(coords.begin(), coords.end(), pick);
            coords.resize(opt.max_per_param);
        }
        for (std::size_t i : coords) {
            double& w = p.tensor[i];
            const double w0 = w;
            // Central difference at step h; false when a kink lies inside the stencil.
            auto probe = [&](double h, double& numeric) {
                w = w0 + h;
                const double f_plus = library_loss();
                const auto r_plus = reference_forward(spec, model.params(), input, target, opt.tv_lambda);
                w = w0 - h;
                const double f_minus = library_loss();
                const auto r_minus = reference_forward(spec, model.params(), input, target, opt.tv_lambda);
                w = w0;
                numeric = (f_plus - f_minus) / (2.0 * h);
                return r_plus.pattern == base.pattern && r_minus.pattern == base.pattern;
            };
            double numeric = 0.0;
            if (!probe(opt.h, numeric)) {
                if (!probe(opt.kink_h, numeric)) {
                    ++report.skipped;
                    continue;
                }
                ++report.fallback;
            }
            const double err = relative_error(analytic[i], numeric, opt.floor);
            ++report.checked;
            if (err > report.worst) {
                report.worst = err;
                report.worst_param = name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

} // namespace dctdrift::testing
