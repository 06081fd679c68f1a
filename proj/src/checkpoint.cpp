#include "dctdrift/error.h"
#include "dctdrift/model.h"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

// Layout (all integers little-endian):
//   "DCTDRIFT" | u32 version | u64 header_len | header JSON
//   u64 param_count, then per parameter:
//     u32 name_len | name | u8 non_negative | u32 rank | u64 dims[rank]
//     three arrays (value, first moment, second moment): u64 len | f64[len]
namespace dctdrift {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'T', 'D', 'R', 'I', 'F', 'T'};

using json = nlohmann::json;

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_from(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    void array(std::span<const double> a)
    {
        u64(a.size());
        for (double v : a) f64(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint8_t u8()
    {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n)
    {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> array(std::size_t expected)
    {
        const std::uint64_t n = u64();
        if (n != expected) {
            throw CorruptCheckpoint("array length " + std::to_string(n) + " does not match its shape (" +
                                    std::to_string(expected) + ")");
        }
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    bool done() const noexcept { return pos_ == in_.size(); }

private:
    void need(std::uint64_t n) const
    {
        if (n > in_.size() - pos_) throw CorruptCheckpoint("checkpoint is truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

json spec_to_json(const ModelSpec& s)
{
    return json{{"initial_kernel", s.initial_kernel},   {"block_dilations", s.block_dilations},
                {"channels", s.channels},               {"dropout_rate", s.dropout_rate},
                {"dct_window", s.dct_window},           {"dilated_kernel", s.dilated_kernel}};
}

ModelSpec spec_from_json(const json& j)
{
    ModelSpec s;
    s.initial_kernel = j.at("initial_kernel").get<std::size_t>();
    s.block_dilations = j.at("block_dilations").get<std::vector<std::size_t>>();
    s.channels = j.at("channels").get<std::size_t>();
    s.dropout_rate = j.at("dropout_rate").get<double>();
    s.dct_window = j.at("dct_window").get<std::size_t>();
    s.dilated_kernel = j.at("dilated_kernel").get<std::size_t>();
    return s;
}

} // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt)
{
    json header{
        {"spec", spec_to_json(ckpt.spec)},
        {"normalization", {{"mean", ckpt.norm.mean}, {"std", ckpt.norm.std}}},
        {"meta",
         {{"epochs_run", ckpt.meta.epochs_run},
          {"best_epoch", ckpt.meta.best_epoch},
          {"train_loss", number_or_null(ckpt.meta.train_loss)},
          {"val_loss", number_or_null(ckpt.meta.val_loss)},
          {"seed", ckpt.meta.seed},
          {"tv_lambda", ckpt.meta.tv_lambda},
          {"sequence_length", ckpt.meta.sequence_length}}},
        {"optimizer_step", ckpt.params.step()},
    };
    const std::string text = header.dump();

    Writer w;
    w.bytes(std::string_view(kMagic, sizeof kMagic));
    w.u32(Checkpoint::kFormatVersion);
    w.u64(text.size());
    w.bytes(text);
    w.u64(ckpt.params.entries().size());
    for (const auto& [name, p] : ckpt.params.entries()) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u8(p.non_negative ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
        for (std::size_t d : p.tensor.shape()) w.u64(d);
        w.array(p.tensor.data());
        w.array(p.first_moment);
        w.array(p.second_moment);
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes)
{
    Reader r(bytes);
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CorruptCheckpoint("not a checkpoint file (bad magic)");
    }
    r.bytes(sizeof kMagic);
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kFormatVersion) {
        throw VersionMismatch("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                              std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    const std::uint64_t header_len = r.u64();
    const auto text = r.bytes(header_len);

    Checkpoint ckpt;
    try {
        const json header = json::parse(text);
        ckpt.spec = spec_from_json(header.at("spec"));
        ckpt.norm.mean = header.at("normalization").at("mean").get<double>();
        ckpt.norm.std = header.at("normalization").at("std").get<double>();
        const json& meta = header.at("meta");
        ckpt.meta.epochs_run = meta.at("epochs_run").get<std::size_t>();
        ckpt.meta.best_epoch = meta.at("best_epoch").get<std::size_t>();
        ckpt.meta.train_loss = number_from(meta.at("train_loss"));
        ckpt.meta.val_loss = number_from(meta.at("val_loss"));
        ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.meta.tv_lambda = meta.at("tv_lambda").get<double>();
        ckpt.meta.sequence_length = meta.at("sequence_length").get<std::size_t>();
        ckpt.params.set_step(header.at("optimizer_step").get<std::uint64_t>());
    } catch (const json::exception& e) {
        throw CorruptCheckpoint(std::string("bad checkpoint header: ") + e.what());
    }

    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name(r.bytes(r.u32()));
        const bool non_negative = r.u8() != 0;
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw CorruptCheckpoint("implausible tensor rank in checkpoint");
        nn::Shape shape(rank);
        std::uint64_t n = 1;
        for (auto& d : shape) {
            d = r.u64();
            if (d != 0 && n > (std::uint64_t{1} << 40) / d) throw CorruptCheckpoint("implausible tensor size");
            n *= d;
        }
        auto value = r.array(n);
        auto m1 = r.array(n);
        auto m2 = r.array(n);
        if (ckpt.params.contains(name)) throw CorruptCheckpoint("duplicate parameter " + name);
        ckpt.params.add(name, nn::Tensor(std::move(shape), std::move(value)), non_negative);
        auto& p = ckpt.params.entries().at(name);
        p.first_moment = std::move(m1);
        p.second_moment = std::move(m2);
    }
    if (!r.done()) throw CorruptCheckpoint("trailing bytes after checkpoint payload");
    // Validates names and shapes against the spec.
    (void)model_from_checkpoint(ckpt);
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return deserialize_checkpoint(ss.str());
}

} // namespace dctdrift
