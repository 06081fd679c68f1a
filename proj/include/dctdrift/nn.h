#pragma once

#include "dctdrift/random.h"
#include "dctdrift/transforms.h"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <new>
#include <span>
#include <string>
#include <vector>

// Reverse-mode differentiation over the handful of operations the drift
// network needs. Activations are laid out batch x channels x time, filters
// out-channels x in-channels x kernel, all row-major doubles.
namespace dctdrift::nn {

using Shape = std::vector<std::size_t>;

// Every buffer handed to Eigen starts on a cache line. Eigen picks its
// vectorized path from the pointer alignment, so without this the rounding of
// a result could depend on which thread allocated the buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool has_grad() const noexcept { return has_grad_; }
    // Allocates a zeroed gradient on first use.
    std::span<double> grad();
    std::span<const double> grad() const noexcept { return grad_; }
    void zero_grad();
    void clear_grad() noexcept
    {
        grad_.clear();
        has_grad_ = false;
    }

private:
    Shape shape_;
    Buffer data_;
    Buffer grad_;
    bool has_grad_ = false;
};

struct Parameter {
    Tensor tensor;
    bool non_negative = false; // clamped to >= 0 after every optimizer update
    std::vector<double> first_moment;
    std::vector<double> second_moment;
};

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor value, bool non_negative = false);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::map<std::string, Parameter>& entries() noexcept { return params_; }
    const std::map<std::string, Parameter>& entries() const noexcept { return params_; }

    std::size_t parameter_count() const;
    std::uint64_t step() const noexcept { return step_; }
    void set_step(std::uint64_t s) noexcept { step_ = s; }

    void zero_grad();
    void clear_grad();

private:
    std::map<std::string, Parameter> params_;
    std::uint64_t step_ = 0;
};

using VarId = std::size_t;

class Tape {
public:
    using Backward = std::function<void(Tape&, VarId)>;

    // A tape built with record_grad = false keeps values only (inference).
    explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}

    VarId constant(Tensor value);
    // Binds a stored parameter without copying it; the store must outlive the
    // tape. Through the mutable overload, backward() adds into the stored
    // gradient; the const overload only exposes gradients on the tape.
    VarId parameter(ParamStore& store, const std::string& name);
    VarId parameter(const ParamStore& store, const std::string& name);
    VarId record(Tensor value, std::vector<VarId> inputs, Backward backward);

    const Tensor& value(VarId id) const;
    bool requires_grad(VarId id) const { return nodes_.at(id).requires_grad; }
    std::span<const double> grad(VarId id) const { return nodes_.at(id).grad; }
    // Gradient buffer of a node, allocated zeroed on first use.
    std::span<double> grad_accumulator(VarId id);

    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }

    // Fills node gradients only. Parameter tensors are left untouched.
    void run_backward(VarId loss);

    struct ParamGrad {
        const std::string* name;
        std::span<const double> grad;
    };
    std::vector<ParamGrad> parameter_grads() const;
    // Adds node gradients of bound parameters into the parameter tensors.
    void accumulate_parameter_grads();

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor* grad_sink = nullptr;
        const std::string* param_name = nullptr;
        Buffer grad;
        Backward backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    bool record_grad_ = true;
};

// Backpropagates from a scalar loss and adds every bound parameter's
// gradient into its tensor in the store.
void backward(Tape& tape, VarId loss);

// y[b,o,n] = bias[o] + sum_{i,k} w[o,i,k] * x[b,i,n - dilation*k], with x
// read as zero before the start of the sequence.
VarId causal_dilated_conv(Tape& tape, VarId input, VarId weights, VarId bias, std::size_t dilation);

VarId relu(Tape& tape, VarId input);

// Zeroes whole (batch, channel) feature maps with probability `rate` and
// rescales survivors by 1/(1-rate). Identity when not training.
VarId channel_dropout(Tape& tape, VarId input, double rate, bool training, Rng& rng);

VarId add(Tape& tape, VarId a, VarId b);

// Per channel: slide a causal window of ctx.size() samples (zero padded on
// the left), take its DCT, soft-threshold with that channel's threshold and
// keep only the reconstructed last sample of the window.
VarId dct_threshold(Tape& tape, VarId input, VarId thresholds, const DctWindow& ctx);

VarId sum(Tape& tape, VarId input);
VarId half_squared_norm(Tape& tape, VarId input);

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps);

} // namespace dctdrift::nn
