#include "dctdrift/error.h"
#include "dctdrift/model.h"
#include "dctdrift/random.h"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dctdrift;
namespace fs = std::filesystem;

namespace {

ModelSpec small_spec()
{
    ModelSpec s;
    s.channels = 5;
    s.block_dilations = {2, 4};
    s.dct_window = 8;
    return s;
}

// Checkpoint after a short training run, so moments and step are populated.
Checkpoint trained_checkpoint()
{
    Rng rng = make_stream(1, {});
    std::normal_distribution<double> n;
    std::vector<TrainingPair> pairs(4);
    for (auto& p : pairs) {
        for (int i = 0; i < 48; ++i) {
            p.drift.push_back(0.01 * i);
            p.observed.push_back(0.01 * i + n(rng));
        }
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.seed = 77;
    return train(pairs, {}, small_spec(), cfg, Normalization{1.25, 0.75}).checkpoint;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<double> probe(const TcnnDct& m)
{
    std::vector<double> x(100);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * i) + 0.01 * i;
    return m.predict(x);
}

} // namespace

TEST_CASE("save and load are bit exact")
{
    const Checkpoint ckpt = trained_checkpoint();
    const fs::path path = fs::temp_directory_path() / "dctdrift_ckpt_roundtrip.bin";
    save_checkpoint(ckpt, path);
    const Checkpoint back = load_checkpoint(path);

    CHECK(back.spec == ckpt.spec);
    CHECK(back.norm.mean == ckpt.norm.mean);
    CHECK(back.norm.std == ckpt.norm.std);
    CHECK(back.meta.epochs_run == 2);
    CHECK(back.meta.seed == 77);
    CHECK(back.meta.sequence_length == 48);
    CHECK(back.meta.train_loss == ckpt.meta.train_loss);
    CHECK(std::isnan(back.meta.val_loss));
    CHECK(back.params.step() == ckpt.params.step());
    for (const auto& [name, p] : ckpt.params.entries()) {
        const auto& q = back.params.entries().at(name);
        CHECK(q.non_negative == p.non_negative);
        CHECK(q.tensor.shape() == p.tensor.shape());
        CHECK(std::memcmp(q.tensor.data().data(), p.tensor.data().data(), p.tensor.size() * sizeof(double)) == 0);
        CHECK(q.first_moment == p.first_moment);
        CHECK(q.second_moment == p.second_moment);
    }

    const auto a = probe(model_from_checkpoint(ckpt));
    const auto b = probe(model_from_checkpoint(back));
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

    const fs::path again = fs::temp_directory_path() / "dctdrift_ckpt_roundtrip2.bin";
    save_checkpoint(back, again);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("truncated checkpoints are rejected")
{
    const std::string bytes = serialize_checkpoint(trained_checkpoint());
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, std::size_t{40}, bytes.size() / 2,
                            bytes.size() - 1}) {
        CHECK_THROWS_AS(deserialize_checkpoint(std::string_view(bytes).substr(0, cut)), CorruptCheckpoint);
    }
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CorruptCheckpoint);
}

TEST_CASE("foreign and future files are rejected")
{
    std::string bytes = serialize_checkpoint(trained_checkpoint());
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CorruptCheckpoint);

    std::string future = bytes;
    const std::uint32_t v = 99;
    for (int i = 0; i < 4; ++i) future[8 + i] = static_cast<char>((v >> (8 * i)) & 0xff);
    CHECK_THROWS_AS(deserialize_checkpoint(future), VersionMismatch);

    const fs::path path = fs::temp_directory_path() / "dctdrift_ckpt_v99.bin";
    std::ofstream(path, std::ios::binary) << future;
    CHECK_THROWS_AS(load_checkpoint(path), VersionMismatch);
    CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "dctdrift_ckpt_missing.bin"), IoError);
}

TEST_CASE("parameters that do not match the spec are rejected")
{
    Checkpoint ckpt = trained_checkpoint();
    ckpt.spec.channels = 6;
    CHECK_THROWS(deserialize_checkpoint(serialize_checkpoint(ckpt)));
}
