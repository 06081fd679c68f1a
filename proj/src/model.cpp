#include "dctdrift/model.h"

#include "dctdrift/error.h"
#include "dctdrift/parallel.h"
#include "dctdrift/synth.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace dctdrift {

void ModelSpec::validate() const
{
    if (initial_kernel < 1 || dilated_kernel < 1) throw InvalidParameter("kernel lengths must be >= 1");
    if (channels < 1) throw InvalidParameter("channels must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidParameter("dropout_rate must lie in [0, 1)");
    if (dct_window < 1) throw InvalidParameter("dct_window must be >= 1");
    std::size_t prev = 0;
    for (std::size_t r : block_dilations) {
        if (r == 0 || (r & (r - 1)) != 0) {
            throw InvalidParameter(fmt::format("dilation {} is not a power of two", r));
        }
        if (r <= prev) throw InvalidParameter("dilations must be strictly increasing");
        prev = r;
    }
}

std::size_t ModelSpec::receptive_field() const
{
    std::size_t rf = initial_kernel;
    for (std::size_t r : block_dilations) rf += 2 * (dilated_kernel - 1) * r;
    return rf;
}

void TrainConfig::validate() const
{
    if (batch_size < 1) throw InvalidParameter("batch_size must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("learning rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw InvalidParameter("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw InvalidParameter("Adam eps must be positive");
    if (!(tv_lambda >= 0.0)) throw InvalidParameter("tv_lambda must be non-negative");
    if (jobs < 1) throw InvalidParameter("jobs must be >= 1");
}

// ---------------------------------------------------------------------------

namespace {

std::string block_param(std::size_t block, int conv, const char* what)
{
    return fmt::format("block{}.conv{}.{}", block, conv, what);
}

nn::Tensor he_uniform(nn::Shape shape, Rng& rng)
{
    const double fan_in = static_cast<double>(shape[1] * shape[2]);
    const double bound = std::sqrt(6.0 / fan_in);
    nn::Tensor t(std::move(shape));
    for (double& v : t.data()) v = uniform(rng, -bound, bound);
    return t;
}

} // namespace

TcnnDct::TcnnDct(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), dct_(spec_.dct_window)
{
    spec_.validate();
    Rng rng = make_stream(seed, {0x1417});
    const std::size_t c = spec_.channels;
    params_.add("init.weight", he_uniform({c, 1, spec_.initial_kernel}, rng));
    params_.add("init.bias", nn::Tensor({c}));
    for (std::size_t j = 0; j < spec_.block_dilations.size(); ++j) {
        for (int conv = 1; conv <= 2; ++conv) {
            // conv2 starts at zero: each block is the identity at init.
            params_.add(block_param(j, conv, "weight"),
                        conv == 1 ? he_uniform({c, c, spec_.dilated_kernel}, rng) : nn::Tensor({c, c, spec_.dilated_kernel}));
            params_.add(block_param(j, conv, "bias"), nn::Tensor({c}));
        }
    }
    params_.add("dct.threshold", nn::Tensor({c}), true);
    params_.add("head.weight", he_uniform({1, c, 1}, rng));
    params_.add("head.bias", nn::Tensor({1}));
}

TcnnDct::TcnnDct(ModelSpec spec, nn::ParamStore params)
    : spec_(std::move(spec)), params_(std::move(params)), dct_(spec_.dct_window)
{
    spec_.validate();
    const TcnnDct reference(spec_, 0);
    for (const auto& [name, p] : reference.params().entries()) {
        if (!params_.contains(name)) throw InvalidParameter("missing parameter " + name);
        if (params_.get(name).shape() != p.tensor.shape()) {
            throw ShapeMismatch("parameter " + name + " has shape " + nn::shape_string(params_.get(name).shape()) +
                                ", expected " + nn::shape_string(p.tensor.shape()));
        }
    }
    if (params_.entries().size() != reference.params().entries().size()) {
        throw InvalidParameter("unexpected extra parameters for this model spec");
    }
    params_.entries().at("dct.threshold").non_negative = true;
}

nn::VarId TcnnDct::build(nn::Tape& tape, nn::VarId input, bool training, Rng* rng,
                         const std::function<nn::VarId(const std::string&)>& bind) const
{
    const auto& x = tape.value(input);
    if (x.rank() != 3 || x.dim(1) != 1) {
        throw ShapeMismatch("model input must be [batch x 1 x time], got " + nn::shape_string(x.shape()));
    }
    if (training && spec_.dropout_rate > 0.0 && rng == nullptr) {
        throw InvalidParameter("training-mode forward needs a random generator");
    }
    Rng unused;
    Rng& gen = rng ? *rng : unused;

    nn::VarId h = nn::causal_dilated_conv(tape, input, bind("init.weight"), bind("init.bias"), 1);
    for (std::size_t j = 0; j < spec_.block_dilations.size(); ++j) {
        const std::size_t r = spec_.block_dilations[j];
        nn::VarId a = nn::causal_dilated_conv(tape, h, bind(block_param(j, 1, "weight")),
                                              bind(block_param(j, 1, "bias")), r);
        a = nn::relu(tape, a);
        a = nn::channel_dropout(tape, a, spec_.dropout_rate, training, gen);
        a = nn::causal_dilated_conv(tape, a, bind(block_param(j, 2, "weight")), bind(block_param(j, 2, "bias")), r);
        a = nn::relu(tape, a);
        h = nn::add(tape, a, h);
    }
    h = nn::dct_threshold(tape, h, bind("dct.threshold"), dct_);
    return nn::causal_dilated_conv(tape, h, bind("head.weight"), bind("head.bias"), 1);
}

nn::VarId TcnnDct::forward(nn::Tape& tape, nn::VarId input, bool training, Rng* rng)
{
    return build(tape, input, training, rng, [&](const std::string& name) { return tape.parameter(params_, name); });
}

nn::VarId TcnnDct::forward_detached(nn::Tape& tape, nn::VarId input, bool training, Rng* rng) const
{
    return build(tape, input, training, rng, [&](const std::string& name) { return tape.parameter(params_, name); });
}

std::vector<double> TcnnDct::predict(std::span<const double> normalized) const
{
    if (normalized.empty()) throw InvalidParameter("cannot run the model on an empty sequence");
    nn::Tape tape(false);
    const auto in = tape.constant(
        nn::Tensor({1, 1, normalized.size()}, std::vector<double>(normalized.begin(), normalized.end())));
    const auto out = forward_detached(tape, in, false, nullptr);
    const auto v = tape.value(out).data();
    return std::vector<double>(v.begin(), v.end());
}

// ---------------------------------------------------------------------------

double drift_loss(std::span<const double> estimate, std::span<const double> target, double tv_lambda)
{
    if (estimate.size() != target.size()) {
        throw ShapeMismatch(fmt::format("loss: length mismatch ({} vs {})", estimate.size(), target.size()));
    }
    if (estimate.size() < 2) throw InvalidParameter("loss needs sequences of length >= 2");
    double sq = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const double e = target[i] - estimate[i];
        sq += e * e;
        if (i) tv += std::abs(estimate[i] - estimate[i - 1]);
    }
    return sq + tv_lambda * tv;
}

nn::VarId drift_loss(nn::Tape& tape, nn::VarId estimate, std::span<const double> target, double tv_lambda)
{
    const auto& est = tape.value(estimate);
    if (est.size() != target.size()) {
        throw ShapeMismatch(fmt::format("loss: length mismatch ({} vs {})", est.size(), target.size()));
    }
    const std::size_t len = est.rank() ? est.dim(est.rank() - 1) : 0;
    if (len < 2) throw InvalidParameter("loss needs sequences of length >= 2");
    const std::size_t seqs = est.size() / len;
    double total = 0.0;
    for (std::size_t s = 0; s < seqs; ++s) {
        total += drift_loss(est.data().subspan(s * len, len), target.subspan(s * len, len), tv_lambda);
    }
    std::vector<double> tgt(target.begin(), target.end());
    return tape.record(nn::Tensor({1}, std::vector<double>{total}), {estimate},
                       [estimate, len, tv_lambda, tgt = std::move(tgt)](nn::Tape& t, nn::VarId self) {
        const double g = t.grad(self)[0];
        const auto& est = t.value(estimate);
        auto ge = t.grad_accumulator(estimate);
        for (std::size_t i = 0; i < ge.size(); ++i) {
            ge[i] += g * 2.0 * (est[i] - tgt[i]);
            if (i % len == 0) continue;
            const double d = est[i] - est[i - 1];
            const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            ge[i] += g * tv_lambda * sgn;
            ge[i - 1] -= g * tv_lambda * sgn;
        }
    });
}

DriftEstimate estimate_drift(const TcnnDct& model, const TimeSeries& observed, const Normalization& norm)
{
    if (observed.empty()) throw InvalidParameter("cannot estimate drift of an empty series");
    const TimeSeries x = normalize(observed, norm.mean, norm.std);
    TimeSeries d(model.predict(x.values), observed.period, observed.start);
    DriftEstimate out;
    out.drift = denormalize(d, norm.mean, norm.std);
    out.corrected = observed;
    for (std::size_t i = 0; i < observed.size(); ++i) out.corrected[i] = observed[i] - out.drift[i];
    return out;
}

TcnnDct model_from_checkpoint(const Checkpoint& ckpt)
{
    return TcnnDct(ckpt.spec, ckpt.params);
}

// ---------------------------------------------------------------------------

namespace {

void check_pairs(const std::vector<TrainingPair>& set, const char* what, std::size_t& len)
{
    for (const auto& p : set) {
        if (p.observed.size() != p.drift.size()) {
            throw ShapeMismatch(fmt::format("{}: observed/drift length mismatch", what));
        }
        if (len == 0) len = p.observed.size();
        if (p.observed.size() != len) throw ShapeMismatch(fmt::format("{}: examples differ in length", what));
    }
}

struct ItemResult {
    double loss = 0.0;
    std::vector<double> grads; // flat, in store order
};

class GradLayout {
public:
    explicit GradLayout(const nn::ParamStore& store)
    {
        std::size_t off = 0;
        for (const auto& [name, p] : store.entries()) {
            offsets_[&name] = off;
            off += p.tensor.size();
        }
        total_ = off;
    }
    std::size_t total() const noexcept { return total_; }

    void gather(const nn::Tape& tape, std::vector<double>& flat) const
    {
        flat.assign(total_, 0.0);
        for (const auto& pg : tape.parameter_grads()) {
            const std::size_t off = offsets_.at(pg.name);
            for (std::size_t i = 0; i < pg.grad.size(); ++i) flat[off + i] += pg.grad[i];
        }
    }

    void scatter(const std::vector<double>& flat, nn::ParamStore& store) const
    {
        std::size_t off = 0;
        for (auto& [name, p] : store.entries()) {
            auto g = p.tensor.grad();
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + g.size()), g.begin());
            off += g.size();
        }
    }

private:
    std::map<const std::string*, std::size_t> offsets_;
    std::size_t total_ = 0;
};

ItemResult run_item(const TcnnDct& model, const TrainingPair& pair, double tv_lambda, Rng& rng,
                    const GradLayout& layout)
{
    nn::Tape tape;
    const std::size_t len = pair.observed.size();
    const auto in = tape.constant(nn::Tensor({1, 1, len}, pair.observed));
    const auto out = model.forward_detached(tape, in, true, &rng);
    const auto loss = drift_loss(tape, out, pair.drift, tv_lambda);
    tape.run_backward(loss);
    ItemResult r;
    r.loss = tape.value(loss)[0];
    layout.gather(tape, r.grads);
    return r;
}

} // namespace

double evaluate_loss(const TcnnDct& model, const std::vector<TrainingPair>& set, double tv_lambda, std::size_t jobs)
{
    if (set.empty()) throw InvalidParameter("cannot evaluate on an empty set");
    std::vector<double> losses(set.size());
    parallel_for(set.size(), jobs, [&](std::size_t i) {
        losses[i] = drift_loss(model.predict(set[i].observed), set[i].drift, tv_lambda);
    });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(set.size());
}

TrainResult train(const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const ModelSpec& spec, const TrainConfig& cfg, const Normalization& norm, const Checkpoint* resume,
                  const EpochCallback& on_epoch)
{
    spec.validate();
    cfg.validate();
    if (train_set.empty()) throw InvalidParameter("training set is empty");
    std::size_t len = 0;
    check_pairs(train_set, "training set", len);
    check_pairs(val_set, "validation set", len);
    if (len < 2) throw InvalidParameter("training sequences must have length >= 2");
    if (resume && !(resume->spec == spec)) throw InvalidParameter("resume checkpoint was built for a different model spec");

    TcnnDct model = resume ? model_from_checkpoint(*resume) : TcnnDct(spec, cfg.seed);

    TrainResult result;
    Checkpoint& best = result.checkpoint;
    best.spec = spec;
    best.norm = resume ? resume->norm : norm;
    if (resume) {
        best.meta = resume->meta;
    } else {
        best.meta.seed = cfg.seed;
        best.meta.tv_lambda = cfg.tv_lambda;
    }
    best.meta.sequence_length = len;
    best.params = model.params();
    if (cfg.epochs == 0) return result;

    const GradLayout layout(model.params());
    const std::size_t first_epoch = best.meta.epochs_run + 1;
    double best_score = std::numeric_limits<double>::infinity();
    if (resume) {
        const double prior = val_set.empty() ? resume->meta.train_loss : resume->meta.val_loss;
        if (std::isfinite(prior)) best_score = prior;
    }
    std::vector<std::size_t> order(train_set.size());
    std::vector<double> total(layout.total());

    for (std::size_t epoch = first_epoch; epoch < first_epoch + cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = make_stream(cfg.seed, {epoch, 0x5eed});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::vector<ItemResult> items(count);
            parallel_for(count, cfg.jobs, [&](std::size_t k) {
                Rng rng = make_stream(cfg.seed, {epoch, batch_index, k, 0xd20f});
                items[k] = run_item(model, train_set[order[start + k]], cfg.tv_lambda, rng, layout);
            });

            std::fill(total.begin(), total.end(), 0.0);
            for (const auto& it : items) {
                if (!std::isfinite(it.loss)) {
                    throw NumericError(fmt::format("non-finite training loss at epoch {}, batch {}", epoch, batch_index));
                }
                loss_sum += it.loss;
                for (std::size_t i = 0; i < total.size(); ++i) total[i] += it.grads[i];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (double& g : total) g *= inv;
            layout.scatter(total, model.params());
            nn::adam_step(model.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(train_set.size());
        m.val_loss = val_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : evaluate_loss(model, val_set, cfg.tv_lambda, cfg.jobs);
        if (!std::isfinite(m.train_loss) || (!val_set.empty() && !std::isfinite(m.val_loss))) {
            throw NumericError(fmt::format("non-finite loss after epoch {}", epoch));
        }
        const double score = val_set.empty() ? m.train_loss : m.val_loss;
        if (score < best_score) {
            best_score = score;
            best.params = model.params();
            best.meta.best_epoch = epoch;
            best.meta.train_loss = m.train_loss;
            best.meta.val_loss = m.val_loss;
        }
        result.history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    best.meta.epochs_run = first_epoch + cfg.epochs - 1;
    best.params.clear_grad();
    return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "epoch,train_loss,val_loss\n";
    for (const auto& m : history) os << fmt::format("{},{},{}\n", m.epoch, m.train_loss, m.val_loss);
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace dctdrift
