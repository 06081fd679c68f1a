#include "dctdrift/transforms.h"

#include "dctdrift/error.h"

#include <cmath>
#include <numbers>
#include <string>

namespace dctdrift {

DctWindow::DctWindow(std::size_t size) : size_(size)
{
    if (size == 0) {
        throw InvalidParameter("DCT window size must be positive");
    }
    const double n = static_cast<double>(size);
    basis_.resize(size * size);
    for (std::size_t k = 0; k < size; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (std::size_t m = 0; m < size; ++m) {
            basis_[k * size + m] =
                scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 (static_cast<double>(m) + 0.5) / n);
        }
    }
    inverse_row_.resize(size);
    for (std::size_t k = 0; k < size; ++k) {
        inverse_row_[k] = basis_[k * size + size - 1];
    }
}

namespace {

void check_length(std::size_t got, const DctWindow& ctx)
{
    if (got != ctx.size()) {
        throw ShapeMismatch("DCT input has length " + std::to_string(got) + ", window size is " +
                            std::to_string(ctx.size()));
    }
}

} // namespace

std::vector<double> dct_forward(std::span<const double> window, const DctWindow& ctx)
{
    check_length(window.size(), ctx);
    const std::size_t n = ctx.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            acc += ctx.basis(k, m) * window[m];
        }
        out[k] = acc;
    }
    return out;
}

double idct_last_sample(std::span<const double> coeffs, const DctWindow& ctx)
{
    check_length(coeffs.size(), ctx);
    const auto row = ctx.inverse_row();
    double acc = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        acc += row[k] * coeffs[k];
    }
    return acc;
}

} // namespace dctdrift
