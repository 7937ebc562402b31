#include "condflow/nn/layers.hpp"

#include <cmath>

#include "condflow/errors.hpp"

namespace condflow::nn {
namespace {

Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(in + out, 1)));
    std::uniform_real_distribution<double> u(-limit, limit);
    std::vector<double> w(in * out);
    for (auto& v : w) v = u(rng);
    return Tensor::from(in, out, std::move(w), true);
}

}  // namespace

void ParamSet::append(const ParamSet& other, const std::string& prefix) {
    for (const auto& [name, t] : other.items_) items_.emplace_back(prefix + name, t);
}

std::vector<Tensor> ParamSet::tensors() const {
    std::vector<Tensor> out;
    out.reserve(items_.size());
    for (const auto& item : items_) out.push_back(item.second);
    return out;
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& item : items_) n += item.second.size();
    return n;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init)
    : in_(in), out_(out),
      weight_(zero_init ? Tensor::zeros(in, out, true) : glorot(in, out, rng)),
      bias_(Tensor::zeros(1, out, true)) {}

Tensor Linear::operator()(const Tensor& x) const {
    if (x.cols() != in_)
        throw ShapeError("linear: expected " + std::to_string(in_) + " input columns, got " +
                         std::to_string(x.cols()));
    return ad::matmul(x, weight_) + bias_;
}

ParamSet Linear::params() const {
    ParamSet p;
    p.add("weight", weight_);
    p.add("bias", bias_);
    return p;
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
         bool zero_last) {
    std::size_t prev = in;
    for (std::size_t h : hidden) {
        layers_.emplace_back(prev, h, rng);
        prev = h;
    }
    layers_.emplace_back(prev, out, rng, zero_last);
}

Tensor Mlp::operator()(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i](h);
        if (i + 1 < layers_.size()) h = ad::tanh(h);
    }
    return h;
}

ParamSet Mlp::params() const {
    ParamSet p;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        p.append(layers_[i].params(), "l" + std::to_string(i) + ".");
    return p;
}

LstmCell::LstmCell(std::size_t in, std::size_t hidden, Rng& rng)
    : in_(in), hidden_(hidden), weight_(glorot(in + hidden, 4 * hidden, rng)),
      bias_(Tensor::zeros(1, 4 * hidden, true)) {
    // Forget gate starts open.
    auto b = bias_.mutable_data();
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
}

LstmState LstmCell::zero_state(std::size_t batch) const {
    return {Tensor::zeros(batch, hidden_), Tensor::zeros(batch, hidden_)};
}

LstmState LstmCell::operator()(const Tensor& x, const LstmState& s) const {
    if (x.cols() != in_) throw ShapeError("lstm: input width mismatch");
    const Tensor gates = ad::matmul(ad::concat_cols({x, s.h}), weight_) + bias_;
    const std::size_t h = hidden_;
    const Tensor i = ad::sigmoid(ad::slice_cols(gates, 0, h));
    const Tensor f = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
    const Tensor g = ad::tanh(ad::slice_cols(gates, 2 * h, 3 * h));
    const Tensor o = ad::sigmoid(ad::slice_cols(gates, 3 * h, 4 * h));
    Tensor c = f * s.c + i * g;
    Tensor hn = o * ad::tanh(c);
    return {std::move(hn), std::move(c)};
}

ParamSet LstmCell::params() const {
    ParamSet p;
    p.add("weight", weight_);
    p.add("bias", bias_);
    return p;
}

Tensor encode_sequence(const LstmCell& cell, const std::vector<Tensor>& steps) {
    if (steps.empty()) throw InputError("encode_sequence: empty sequence");
    LstmState s = cell.zero_state(steps.front().rows());
    for (const auto& x : steps) s = cell(x, s);
    return s.h;
}

SocialPool::SocialPool(std::size_t height, std::size_t width, std::size_t features,
                       std::size_t channels, std::size_t out, Rng& rng)
    : height_(height), width_(width), features_(features), channels_(channels),
      w1_(glorot(features, channels, rng)), b1_(Tensor::zeros(1, channels, true)),
      w2_(glorot(9 * channels, channels, rng)), b2_(Tensor::zeros(1, channels, true)),
      w3_(glorot(9 * channels, channels, rng)), b3_(Tensor::zeros(1, channels, true)),
      head_(height * width * channels, out, rng) {}

Tensor SocialPool::operator()(const Tensor& grid) const {
    if (grid.cols() != input_width())
        throw ShapeError("social_pool: grid has " + std::to_string(grid.cols()) +
                         " columns, expected " + std::to_string(input_width()));
    const ad::Conv2dGeometry g1{height_, width_, features_, channels_, 1};
    const ad::Conv2dGeometry g3{height_, width_, channels_, channels_, 3};
    Tensor h = ad::tanh(ad::conv2d(grid, w1_, b1_, g1));
    h = ad::tanh(ad::conv2d(h, w2_, b2_, g3));
    h = ad::tanh(ad::conv2d(h, w3_, b3_, g3));
    return head_(h);
}

ParamSet SocialPool::params() const {
    ParamSet p;
    p.add("conv1.weight", w1_);
    p.add("conv1.bias", b1_);
    p.add("conv2.weight", w2_);
    p.add("conv2.bias", b2_);
    p.add("conv3.weight", w3_);
    p.add("conv3.bias", b3_);
    p.append(head_.params(), "head.");
    return p;
}

}  // namespace condflow::nn
