#include "dctdrift/error.h"
#include "dctdrift/nn.h"
#include "dctdrift/random.h"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dctdrift;
using namespace dctdrift::nn;

namespace {

Tensor run_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t dilation)
{
    Tape tape(false);
    const VarId out = causal_dilated_conv(tape, tape.constant(x), tape.constant(w), tape.constant(b), dilation);
    return tape.value(out);
}

Tensor random_tensor(Shape shape, std::uint64_t seed)
{
    Tensor t(std::move(shape));
    Rng rng = make_stream(seed, {});
    std::normal_distribution<double> n;
    for (double& v : t.data()) v = n(rng);
    return t;
}

} // namespace

TEST_CASE("tensor invariants")
{
    Tensor t({2, 3, 4}, 1.5);
    CHECK(t.size() == 24);
    CHECK_FALSE(t.has_grad());
    CHECK(t.grad().size() == 24);
    CHECK(t.has_grad());
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), ShapeMismatch);
}

TEST_CASE("kernel-1 unit conv is the identity at any dilation")
{
    const Tensor x = random_tensor({2, 1, 17}, 1);
    for (std::size_t r : {1u, 5u, 64u}) {
        const Tensor y = run_conv(x, Tensor({1, 1, 1}, 1.0), Tensor({1}), r);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
    }
}

TEST_CASE("dilated conv impulse response")
{
    Tensor x({1, 1, 40});
    x[10] = 1.0;
    const Tensor w({1, 1, 3}, {0.7, -1.3, 2.1});
    const Tensor y = run_conv(x, w, Tensor({1}), 4);
    for (std::size_t n = 0; n < 40; ++n) {
        const double expected = n == 10 ? 0.7 : n == 14 ? -1.3 : n == 18 ? 2.1 : 0.0;
        CHECK(y[n] == expected);
    }
}

TEST_CASE("conv bias and multi-channel sum")
{
    // y[o,n] = b[o] + sum_i sum_k w[o,i,k] x[i,n-2k], checked directly.
    const Tensor x = random_tensor({2, 3, 12}, 2);
    const Tensor w = random_tensor({2, 3, 2}, 3);
    const Tensor b = random_tensor({2}, 4);
    const Tensor y = run_conv(x, w, b, 2);
    for (std::size_t bi = 0; bi < 2; ++bi) {
        for (std::size_t o = 0; o < 2; ++o) {
            for (std::size_t n = 0; n < 12; ++n) {
                double acc = b[o];
                for (std::size_t i = 0; i < 3; ++i) {
                    for (std::size_t k = 0; k < 2; ++k) {
                        if (n >= 2 * k) acc += w[(o * 3 + i) * 2 + k] * x[(bi * 3 + i) * 12 + n - 2 * k];
                    }
                }
                CHECK(std::abs(y[(bi * 2 + o) * 12 + n] - acc) < 1e-12);
            }
        }
    }
}

TEST_CASE("conv is causal bitwise")
{
    Tensor x = random_tensor({1, 2, 100}, 5);
    const Tensor w = random_tensor({3, 2, 3}, 6);
    const Tensor b = random_tensor({3}, 7);
    const Tensor before = run_conv(x, w, b, 8);
    x[50] += 3.0;
    x[100 + 50] -= 1.0;
    const Tensor after = run_conv(x, w, b, 8);
    for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t n = 0; n < 50; ++n) CHECK(before[o * 100 + n] == after[o * 100 + n]);
    }
}

TEST_CASE("conv shape errors")
{
    CHECK_THROWS_AS(run_conv(Tensor({1, 2, 5}), Tensor({1, 3, 1}), Tensor({1}), 1), ShapeMismatch);
    CHECK_THROWS_AS(run_conv(Tensor({1, 2, 5}), Tensor({1, 2, 1}), Tensor({2}), 1), ShapeMismatch);
    CHECK_THROWS_AS(run_conv(Tensor({2, 5}), Tensor({1, 2, 1}), Tensor({1}), 1), ShapeMismatch);
    CHECK_THROWS_AS(run_conv(Tensor({1, 2, 5}), Tensor({1, 2, 1}), Tensor({1}), 0), InvalidParameter);
}

TEST_CASE("relu on one-signed inputs")
{
    Tape tape(false);
    const VarId neg = relu(tape, tape.constant(Tensor({4}, {-1.0, -0.5, -3.0, -1e-9})));
    for (double v : tape.value(neg).data()) CHECK(v == 0.0);
    const Tensor pos({3}, {0.1, 2.0, 7.5});
    const VarId id = relu(tape, tape.constant(pos));
    for (std::size_t i = 0; i < 3; ++i) CHECK(tape.value(id)[i] == pos[i]);
}

TEST_CASE("channel dropout is the identity when disabled")
{
    const Tensor x = random_tensor({2, 3, 5}, 8);
    Rng rng = make_stream(1, {});
    Tape tape(false);
    const VarId in = tape.constant(x);
    const VarId eval = channel_dropout(tape, in, 0.2, false, rng);
    const VarId zero = channel_dropout(tape, in, 0.0, true, rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(tape.value(eval)[i] == x[i]);
        CHECK(tape.value(zero)[i] == x[i]);
    }
    CHECK_THROWS_AS(channel_dropout(tape, in, 1.0, true, rng), InvalidParameter);
}

TEST_CASE("channel dropout drops whole channels at the configured rate")
{
    const std::size_t batch = 10, channels = 100, t = 6;
    const Tensor x({batch, channels, t}, 1.0);
    Rng rng = make_stream(2, {});
    std::size_t dropped = 0, maps = 0;
    bool whole = true;
    for (int trial = 0; trial < 10; ++trial) {   // 10 x 1000 feature maps
        Tape tape(false);
        const Tensor& y = tape.value(channel_dropout(tape, tape.constant(x), 0.2, true, rng));
        for (std::size_t m = 0; m < batch * channels; ++m) {
            const bool first_zero = y[m * t] == 0.0;
            for (std::size_t n = 0; n < t; ++n) {
                const double v = y[m * t + n];
                whole = whole && (first_zero ? v == 0.0 : v == 1.0 / 0.8);
            }
            dropped += first_zero;
            ++maps;
        }
    }
    const double frac = static_cast<double>(dropped) / static_cast<double>(maps);
    CHECK(maps == 10000);
    CHECK(frac >= 0.19);
    CHECK(frac <= 0.21);
    CHECK(whole);
}

TEST_CASE("channel dropout preserves the mean")
{
    const Tensor x({1, 1000, 1}, 2.0);
    Rng rng = make_stream(3, {});
    double total = 0.0;
    for (int trial = 0; trial < 100; ++trial) {   // 1e5 channel draws
        Tape tape(false);
        for (double v : tape.value(channel_dropout(tape, tape.constant(x), 0.2, true, rng)).data()) total += v;
    }
    CHECK(std::abs(total / 1e5 - 2.0) / 2.0 < 0.01);
}

TEST_CASE("add requires equal shapes")
{
    Tape tape(false);
    CHECK_THROWS_AS(add(tape, tape.constant(Tensor({2})), tape.constant(Tensor({3}))), ShapeMismatch);
}

TEST_CASE("dct layer with zero thresholds is the identity")
{
    const DctWindow ctx(64);
    const Tensor x = random_tensor({2, 3, 150}, 9);
    Tape tape(false);
    const Tensor& y = tape.value(dct_threshold(tape, tape.constant(x), tape.constant(Tensor({3})), ctx));
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
    CHECK(worst < 1e-8);
}

TEST_CASE("dct layer on a constant input")
{
    const std::size_t n_win = 64;
    const DctWindow ctx(n_win);
    const double c = 2.0;
    const Tensor x({1, 2, 200}, c);
    const Tensor thr({2}, {0.5, 3.0});
    Tape tape(false);
    const Tensor& y = tape.value(dct_threshold(tape, tape.constant(x), tape.constant(thr), ctx));
    for (std::size_t ch = 0; ch < 2; ++ch) {
        for (std::size_t n = n_win - 1; n < 200; ++n) {
            const double out = y[ch * 200 + n];
            CHECK(std::abs(out - c) <= thr[ch] / std::sqrt(double(n_win)) + 1e-8);
            CHECK(std::abs(out - (c - thr[ch] / std::sqrt(double(n_win)))) < 1e-12);
        }
    }
}

TEST_CASE("dct layer is causal")
{
    const DctWindow ctx(16);
    Tensor x = random_tensor({1, 2, 60}, 10);
    const Tensor thr({2}, {0.2, 0.4});
    auto run = [&] {
        Tape tape(false);
        return tape.value(dct_threshold(tape, tape.constant(x), tape.constant(thr), ctx));
    };
    const Tensor before = run();
    x[31] += 1.0;
    x[60 + 31] += 1.0;
    const Tensor after = run();
    for (std::size_t ch = 0; ch < 2; ++ch) {
        for (std::size_t n = 0; n <= 30; ++n) CHECK(before[ch * 60 + n] == after[ch * 60 + n]);
    }
}

TEST_CASE("dct layer rejects bad thresholds")
{
    const DctWindow ctx(8);
    Tape tape(false);
    const VarId x = tape.constant(Tensor({1, 2, 10}));
    CHECK_THROWS_AS(dct_threshold(tape, x, tape.constant(Tensor({3})), ctx), ShapeMismatch);
    CHECK_THROWS_AS(dct_threshold(tape, x, tape.constant(Tensor({2}, {0.1, -0.1})), ctx), InvalidParameter);
}

TEST_CASE("backward of a sum gives ones")
{
    ParamStore s;
    s.add("w", random_tensor({3, 4}, 11));
    Tape tape;
    backward(tape, sum(tape, tape.parameter(s, "w")));
    for (double g : s.get("w").grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of half the squared norm gives the parameter")
{
    ParamStore s;
    s.add("w", random_tensor({5}, 12));
    Tape tape;
    backward(tape, half_squared_norm(tape, tape.parameter(s, "w")));
    for (std::size_t i = 0; i < 5; ++i) CHECK(s.get("w").grad()[i] == s.get("w")[i]);
}

TEST_CASE("gradients accumulate across fan-out and calls")
{
    ParamStore s;
    s.add("w", Tensor({2}, {1.0, -2.0}));
    for (int call = 0; call < 2; ++call) {
        Tape tape;
        const VarId w = tape.parameter(s, "w");
        backward(tape, sum(tape, add(tape, w, w)));
    }
    for (double g : s.get("w").grad()) CHECK(g == 4.0);
}

TEST_CASE("backward errors")
{
    ParamStore s;
    s.add("w", Tensor({3}));
    Tape empty;
    CHECK_THROWS_AS(backward(empty, 0), InvalidParameter);
    Tape tape;
    const VarId w = tape.parameter(s, "w");
    CHECK_THROWS_AS(backward(tape, w), ShapeMismatch);
    Tape inference(false);
    const VarId l = sum(inference, inference.parameter(s, "w"));
    CHECK_THROWS_AS(backward(inference, l), InvalidParameter);
}

TEST_CASE("detached parameters keep gradients on the tape")
{
    ParamStore s;
    s.add("w", Tensor({2}, {3.0, 4.0}));
    const ParamStore& cs = s;
    Tape tape;
    tape.run_backward(half_squared_norm(tape, tape.parameter(cs, "w")));
    CHECK_FALSE(s.get("w").has_grad());
    const auto grads = tape.parameter_grads();
    REQUIRE(grads.size() == 1);
    CHECK(*grads[0].name == "w");
    CHECK(grads[0].grad[0] == 3.0);
    CHECK(grads[0].grad[1] == 4.0);
}

TEST_CASE("adam with zero gradients only advances the step")
{
    ParamStore s;
    s.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
    s.zero_grad();
    adam_step(s, 1e-3, 0.9, 0.99, 1e-8);
    CHECK(s.step() == 1);
    CHECK(s.get("w")[0] == 1.0);
    CHECK(s.get("w")[1] == -2.0);
    CHECK(s.get("w")[2] == 0.5);
}

TEST_CASE("adam first step moves by lr against a constant gradient")
{
    const double lr = 1e-3, eps = 1e-8;
    for (double g : {0.37, -5.0, 1e3}) {
        ParamStore s;
        s.add("w", Tensor({1}, {0.25}));
        s.get("w").grad()[0] = g;
        adam_step(s, lr, 0.9, 0.99, eps);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        const double expected = 0.25 - lr * g / (std::abs(g) + eps);
        CHECK(std::abs(s.get("w")[0] - expected) < 1e-15);
        CHECK(std::abs(std::abs(s.get("w")[0] - 0.25) - lr) < lr * 1e-6);
    }
}

TEST_CASE("adam matches a scalar reference over several steps")
{
    ParamStore s;
    s.add("w", Tensor({1}, {1.0}));
    double w = 1.0, m = 0.0, v = 0.0;
    const double lr = 0.01, b1 = 0.9, b2 = 0.99, eps = 1e-8;
    for (int t = 1; t <= 5; ++t) {
        const double g = 2.0 * w - 0.3 * t;
        s.get("w").grad()[0] = g;
        adam_step(s, lr, b1, b2, eps);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        CHECK(std::abs(s.get("w")[0] - w) < 1e-14);
    }
}

TEST_CASE("adam clamps non-negative parameters to zero")
{
    ParamStore s;
    s.add("thr", Tensor({2}, {1e-4, 0.5}), true);
    s.get("thr").grad()[0] = 1.0;
    s.get("thr").grad()[1] = 1.0;
    adam_step(s, 1e-3, 0.9, 0.99, 1e-8);
    CHECK(s.get("thr")[0] == 0.0);
    CHECK(s.get("thr")[1] > 0.0);
}

TEST_CASE("adam requires every gradient")
{
    ParamStore s;
    s.add("a", Tensor({1}, {1.0}));
    s.add("b", Tensor({1}, {1.0}));
    s.get("a").grad()[0] = 1.0;
    CHECK_THROWS_AS(adam_step(s, 1e-3, 0.9, 0.99, 1e-8), InvalidParameter);
    CHECK(s.get("a")[0] == 1.0);
    CHECK(s.step() == 0);
}
