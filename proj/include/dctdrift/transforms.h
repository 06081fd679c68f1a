#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dctdrift {

// Orthonormal DCT-II over a window of `size` samples, stored as a dense
// row-major matrix: coeffs[k] = sum_m basis(k, m) * x[m]. The inverse is the
// transpose, so the last time-domain sample is reconstructed by the last
// column of the basis (`inverse_row`).
class DctWindow {
public:
    explicit DctWindow(std::size_t size = 64);

    std::size_t size() const noexcept { return size_; }
    double basis(std::size_t k, std::size_t m) const noexcept { return basis_[k * size_ + m]; }
    std::span<const double> basis_data() const noexcept { return basis_; }
    std::span<const double> inverse_row() const noexcept { return inverse_row_; }

private:
    std::size_t size_;
    std::vector<double> basis_;
    std::vector<double> inverse_row_;
};

std::vector<double> dct_forward(std::span<const double> window, const DctWindow& ctx);
double idct_last_sample(std::span<const double> coeffs, const DctWindow& ctx);

inline double soft_threshold(double x, double b) noexcept
{
    if (x > b) return x - b;
    if (x < -b) return x + b;
    return 0.0;
}

struct SoftThresholdGrads {
    double d_x;
    double d_b;
};

// Subgradient 0 at the kink |x| == b.
inline SoftThresholdGrads soft_threshold_grads(double x, double b) noexcept
{
    if (x > b) return {1.0, -1.0};
    if (x < -b) return {1.0, 1.0};
    return {0.0, 0.0};
}

} // namespace dctdrift
