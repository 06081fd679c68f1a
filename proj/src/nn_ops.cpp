#include "dctdrift/error.h"
#include "dctdrift/nn.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace dctdrift::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void require_rank(const Tensor& t, std::size_t rank, const char* what)
{
    if (t.rank() != rank) {
        throw ShapeMismatch(std::string(what) + ": expected rank " + std::to_string(rank) +
                            ", got " + shape_string(t.shape()));
    }
}

// Splits an out x in x K filter bank into K dense out x in matrices.
std::vector<Eigen::MatrixXd> split_taps(const Tensor& w)
{
    const std::size_t cout = w.dim(0), cin = w.dim(1), k = w.dim(2);
    std::vector<Eigen::MatrixXd> taps(k, Eigen::MatrixXd(cout, cin));
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t i = 0; i < cin; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                taps[j](o, i) = w[(o * cin + i) * k + j];
            }
        }
    }
    return taps;
}

} // namespace

VarId causal_dilated_conv(Tape& tape, VarId input, VarId weights, VarId bias, std::size_t dilation)
{
    const Tensor& x = tape.value(input);
    const Tensor& w = tape.value(weights);
    const Tensor& b = tape.value(bias);
    require_rank(x, 3, "conv input");
    require_rank(w, 3, "conv weights");
    require_rank(b, 1, "conv bias");
    if (dilation == 0) throw InvalidParameter("dilation must be >= 1");
    const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
    const std::size_t cout = w.dim(0), taps_n = w.dim(2);
    if (w.dim(1) != cin || b.dim(0) != cout || taps_n == 0) {
        throw ShapeMismatch("conv: input " + shape_string(x.shape()) + ", weights " +
                            shape_string(w.shape()) + ", bias " + shape_string(b.shape()));
    }

    const auto taps = split_taps(w);
    const ConstVecMap bvec(b.data().data(), static_cast<Eigen::Index>(cout));
    Tensor out({batch, cout, len});
    const auto T = static_cast<Eigen::Index>(len);
    for (std::size_t bi = 0; bi < batch; ++bi) {
        ConstRowMap xm(x.data().data() + bi * cin * len, static_cast<Eigen::Index>(cin), T);
        RowMap ym(out.data().data() + bi * cout * len, static_cast<Eigen::Index>(cout), T);
        ym.colwise() = bvec;
        for (std::size_t k = 0; k < taps_n; ++k) {
            const auto shift = static_cast<Eigen::Index>(k * dilation);
            if (shift >= T) break;
            ym.rightCols(T - shift).noalias() += taps[k] * xm.leftCols(T - shift);
        }
    }

    return tape.record(std::move(out), {input, weights, bias},
                       [input, weights, bias, dilation, taps](Tape& t, VarId self) {
        const Tensor& x = t.value(input);
        const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
        const std::size_t cout = taps.front().rows();
        const auto T = static_cast<Eigen::Index>(len);
        const auto g = t.grad(self);
        const bool need_x = t.requires_grad(input);
        const bool need_w = t.requires_grad(weights);
        const bool need_b = t.requires_grad(bias);

        std::vector<Eigen::MatrixXd> dtaps;
        if (need_w) dtaps.assign(taps.size(), Eigen::MatrixXd::Zero(cout, cin));
        Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cout));
        std::span<double> gx;
        if (need_x) gx = t.grad_accumulator(input);

        for (std::size_t bi = 0; bi < batch; ++bi) {
            ConstRowMap gm(g.data() + bi * cout * len, static_cast<Eigen::Index>(cout), T);
            ConstRowMap xm(x.data().data() + bi * cin * len, static_cast<Eigen::Index>(cin), T);
            if (need_b) db += gm.rowwise().sum();
            for (std::size_t k = 0; k < taps.size(); ++k) {
                const auto shift = static_cast<Eigen::Index>(k * dilation);
                if (shift >= T) break;
                if (need_w) {
                    dtaps[k].noalias() += gm.rightCols(T - shift) * xm.leftCols(T - shift).transpose();
                }
                if (need_x) {
                    RowMap gxm(gx.data() + bi * cin * len, static_cast<Eigen::Index>(cin), T);
                    gxm.leftCols(T - shift).noalias() += taps[k].transpose() * gm.rightCols(T - shift);
                }
            }
        }
        if (need_w) {
            auto gw = t.grad_accumulator(weights);
            const std::size_t kn = taps.size();
            for (std::size_t o = 0; o < cout; ++o) {
                for (std::size_t i = 0; i < cin; ++i) {
                    for (std::size_t k = 0; k < kn; ++k) {
                        gw[(o * cin + i) * kn + k] += dtaps[k](o, i);
                    }
                }
            }
        }
        if (need_b) {
            auto gb = t.grad_accumulator(bias);
            for (std::size_t o = 0; o < cout; ++o) gb[o] += db[static_cast<Eigen::Index>(o)];
        }
    });
}

VarId relu(Tape& tape, VarId input)
{
    const Tensor& x = tape.value(input);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return tape.record(std::move(out), {input}, [input](Tape& t, VarId self) {
        const Tensor& x = t.value(input);
        const auto g = t.grad(self);
        auto gx = t.grad_accumulator(input);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            if (x[i] > 0.0) gx[i] += g[i];
        }
    });
}

VarId channel_dropout(Tape& tape, VarId input, double rate, bool training, Rng& rng)
{
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw InvalidParameter("dropout rate must lie in [0, 1)");
    }
    if (!training || rate == 0.0) return input;

    const Tensor& x = tape.value(input);
    require_rank(x, 3, "dropout input");
    const std::size_t maps = x.dim(0) * x.dim(1), len = x.dim(2);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<double> scale(maps);
    for (auto& s : scale) s = coin(rng) < rate ? 0.0 : keep_scale;

    Tensor out(x.shape());
    for (std::size_t m = 0; m < maps; ++m) {
        for (std::size_t n = 0; n < len; ++n) out[m * len + n] = x[m * len + n] * scale[m];
    }
    return tape.record(std::move(out), {input}, [input, len, scale = std::move(scale)](Tape& t, VarId self) {
        const auto g = t.grad(self);
        auto gx = t.grad_accumulator(input);
        for (std::size_t m = 0; m < scale.size(); ++m) {
            for (std::size_t n = 0; n < len; ++n) gx[m * len + n] += g[m * len + n] * scale[m];
        }
    });
}

VarId add(Tape& tape, VarId a, VarId b)
{
    const Tensor& x = tape.value(a);
    const Tensor& y = tape.value(b);
    if (x.shape() != y.shape()) {
        throw ShapeMismatch("add: " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, VarId self) {
        const auto g = t.grad(self);
        for (VarId in : {a, b}) {
            if (!t.requires_grad(in)) continue;
            auto gi = t.grad_accumulator(in);
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
        }
    });
}

VarId dct_threshold(Tape& tape, VarId input, VarId thresholds, const DctWindow& ctx)
{
    const Tensor& x = tape.value(input);
    const Tensor& th = tape.value(thresholds);
    require_rank(x, 3, "dct layer input");
    require_rank(th, 1, "dct layer thresholds");
    const std::size_t batch = x.dim(0), chans = x.dim(1), len = x.dim(2);
    if (th.dim(0) != chans) {
        throw ShapeMismatch("dct layer: " + std::to_string(chans) + " channels but " +
                            std::to_string(th.dim(0)) + " thresholds");
    }
    for (double b : th.data()) {
        if (!(b >= 0.0)) throw InvalidParameter("dct layer thresholds must be non-negative");
    }

    const std::size_t win = ctx.size();
    const auto N = static_cast<Eigen::Index>(win);
    const auto cols = static_cast<Eigen::Index>(chans * len);
    ConstRowMap basis(ctx.basis_data().data(), N, N);
    const ConstVecMap last(ctx.inverse_row().data(), N);

    // Coefficients of every window, kept for the backward pass:
    // coeffs[b](k, c*len + n) is bin k of the window ending at sample n.
    std::vector<RowMatrix> coeffs(batch);
    Tensor out(x.shape());
    RowMatrix windows(N, cols);
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const double* xb = x.data().data() + bi * chans * len;
        for (std::size_t l = 0; l < win; ++l) {
            double* row = windows.data() + l * static_cast<std::size_t>(cols);
            const std::size_t lag = win - 1 - l; // row l holds x[n - lag]
            for (std::size_t c = 0; c < chans; ++c) {
                double* dst = row + c * len;
                const double* src = xb + c * len;
                const std::size_t zeros = std::min(lag, len);
                std::fill(dst, dst + zeros, 0.0);
                std::copy(src, src + (len - zeros), dst + zeros);
            }
        }
        coeffs[bi].noalias() = basis * windows;
        RowMatrix& f = coeffs[bi];
        double* ob = out.data().data() + bi * chans * len;
        for (Eigen::Index k = 0; k < N; ++k) {
            const double* fk = f.data() + k * cols;
            const double lk = last[k];
            for (std::size_t c = 0; c < chans; ++c) {
                const double b = th[c];
                const double* src = fk + c * len;
                double* dst = ob + c * len;
                for (std::size_t n = 0; n < len; ++n) dst[n] += lk * soft_threshold(src[n], b);
            }
        }
    }

    return tape.record(std::move(out), {input, thresholds},
                       [input, thresholds, &ctx, coeffs = std::move(coeffs)](Tape& t, VarId self) {
        const Tensor& x = t.value(input);
        const Tensor& th = t.value(thresholds);
        const std::size_t batch = x.dim(0), chans = x.dim(1), len = x.dim(2);
        const std::size_t win = ctx.size();
        const auto N = static_cast<Eigen::Index>(win);
        const auto cols = static_cast<Eigen::Index>(chans * len);
        ConstRowMap basis(ctx.basis_data().data(), N, N);
        const ConstVecMap last(ctx.inverse_row().data(), N);
        const auto g = t.grad(self);
        const bool need_x = t.requires_grad(input);
        const bool need_b = t.requires_grad(thresholds);
        std::span<double> gx, gb;
        if (need_x) gx = t.grad_accumulator(input);
        if (need_b) gb = t.grad_accumulator(thresholds);

        RowMatrix dcoeffs(N, cols);
        RowMatrix dwindows;
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const RowMatrix& f = coeffs[bi];
            const double* gbatch = g.data() + bi * chans * len;
            for (Eigen::Index k = 0; k < N; ++k) {
                const double* fk = f.data() + k * cols;
                double* dk = dcoeffs.data() + k * cols;
                const double lk = last[k];
                for (std::size_t c = 0; c < chans; ++c) {
                    const double b = th[c];
                    double db = 0.0;
                    for (std::size_t n = 0; n < len; ++n) {
                        const auto d = soft_threshold_grads(fk[c * len + n], b);
                        const double gs = lk * gbatch[c * len + n];
                        dk[c * len + n] = gs * d.d_x;
                        db += gs * d.d_b;
                    }
                    if (need_b) gb[c] += db;
                }
            }
            if (!need_x) continue;
            dwindows.noalias() = basis.transpose() * dcoeffs;
            double* gxb = gx.data() + bi * chans * len;
            for (std::size_t l = 0; l < win; ++l) {
                const double* row = dwindows.data() + l * static_cast<std::size_t>(cols);
                const std::size_t lag = win - 1 - l;
                if (lag >= len) continue;
                for (std::size_t c = 0; c < chans; ++c) {
                    const double* src = row + c * len + lag;
                    double* dst = gxb + c * len;
                    for (std::size_t n = 0; n < len - lag; ++n) dst[n] += src[n];
                }
            }
        }
    });
}

VarId sum(Tape& tape, VarId input)
{
    const Tensor& x = tape.value(input);
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return tape.record(Tensor({1}, std::vector<double>{acc}), {input}, [input](Tape& t, VarId self) {
        const double g = t.grad(self)[0];
        for (double& gi : t.grad_accumulator(input)) gi += g;
    });
}

VarId half_squared_norm(Tape& tape, VarId input)
{
    const Tensor& x = tape.value(input);
    double acc = 0.0;
    for (double v : x.data()) acc += v * v;
    return tape.record(Tensor({1}, std::vector<double>{0.5 * acc}), {input}, [input](Tape& t, VarId self) {
        const double g = t.grad(self)[0];
        const Tensor& x = t.value(input);
        auto gx = t.grad_accumulator(input);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * x[i];
    });
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps)
{
    for (const auto& [name, p] : store.entries()) {
        if (!p.tensor.has_grad()) throw InvalidParameter("missing gradient for parameter " + name);
    }
    const std::uint64_t step = store.step() + 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (auto& [name, p] : store.entries()) {
        auto value = p.tensor.data();
        const auto g = std::as_const(p.tensor).grad();
        for (std::size_t i = 0; i < value.size(); ++i) {
            p.first_moment[i] = beta1 * p.first_moment[i] + (1.0 - beta1) * g[i];
            p.second_moment[i] = beta2 * p.second_moment[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = p.first_moment[i] / c1;
            const double v_hat = p.second_moment[i] / c2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            if (p.non_negative && value[i] < 0.0) value[i] = 0.0;
        }
    }
    store.set_step(step);
}

} // namespace dctdrift::nn
