#include "dctdrift/nn.h"

#include "dctdrift/error.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <sstream>

namespace dctdrift::nn {

namespace {

std::size_t shape_product(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
}

} // namespace

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end())
{
    if (data_.size() != shape_product(shape_)) {
        throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
}

std::span<double> Tensor::grad()
{
    if (!has_grad_) {
        grad_.assign(data_.size(), 0.0);
        has_grad_ = true;
    }
    return grad_;
}

void Tensor::zero_grad()
{
    grad_.assign(data_.size(), 0.0);
    has_grad_ = true;
}

// ---------------------------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor value, bool non_negative)
{
    if (params_.count(name)) {
        throw InvalidParameter("duplicate parameter name: " + name);
    }
    Parameter p;
    p.first_moment.assign(value.size(), 0.0);
    p.second_moment.assign(value.size(), 0.0);
    p.tensor = std::move(value);
    p.non_negative = non_negative;
    return params_.emplace(name, std::move(p)).first->second.tensor;
}

Tensor& ParamStore::get(const std::string& name)
{
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidParameter("unknown parameter: " + name);
    return it->second.tensor;
}

const Tensor& ParamStore::get(const std::string& name) const
{
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidParameter("unknown parameter: " + name);
    return it->second.tensor;
}

std::size_t ParamStore::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.tensor.size();
    return n;
}

void ParamStore::zero_grad()
{
    for (auto& [name, p] : params_) p.tensor.zero_grad();
}

void ParamStore::clear_grad()
{
    for (auto& [name, p] : params_) p.tensor.clear_grad();
}

// ---------------------------------------------------------------------------

VarId Tape::constant(Tensor value)
{
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

VarId Tape::parameter(const ParamStore& store, const std::string& name)
{
    auto it = store.entries().find(name);
    if (it == store.entries().end()) throw InvalidParameter("unknown parameter: " + name);
    Node n;
    n.external = &it->second.tensor;
    n.param_name = &it->first;
    n.requires_grad = record_grad_;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

VarId Tape::parameter(ParamStore& store, const std::string& name)
{
    const VarId id = parameter(std::as_const(store), name);
    nodes_[id].grad_sink = &store.get(name);
    return id;
}

VarId Tape::record(Tensor value, std::vector<VarId> inputs, Backward backward)
{
    Node n;
    n.value = std::move(value);
    for (VarId in : inputs) {
        if (record_grad_ && nodes_.at(in).requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

const Tensor& Tape::value(VarId id) const
{
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
}

std::span<double> Tape::grad_accumulator(VarId id)
{
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
    return n.grad;
}

void Tape::run_backward(VarId loss)
{
    if (nodes_.empty()) throw InvalidParameter("backward called on an empty tape");
    if (!record_grad_) throw InvalidParameter("backward called on an inference-only tape");
    if (value(loss).size() != 1) {
        throw ShapeMismatch("backward needs a scalar loss, got shape " +
                            shape_string(value(loss).shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    grad_accumulator(loss)[0] = 1.0;
    for (VarId id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.empty() || !n.backward) continue;
        n.backward(*this, id);
    }
}

std::vector<Tape::ParamGrad> Tape::parameter_grads() const
{
    std::vector<ParamGrad> out;
    for (const auto& n : nodes_) {
        if (n.param_name && !n.grad.empty()) out.push_back({n.param_name, n.grad});
    }
    return out;
}

void Tape::accumulate_parameter_grads()
{
    for (auto& n : nodes_) {
        if (!n.grad_sink || n.grad.empty()) continue;
        auto dst = n.grad_sink->grad();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
}

void backward(Tape& tape, VarId loss)
{
    tape.run_backward(loss);
    tape.accumulate_parameter_grads();
}

} // namespace dctdrift::nn
