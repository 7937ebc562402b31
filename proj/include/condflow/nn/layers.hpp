#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "condflow/autodiff/tensor.hpp"

namespace condflow::nn {

using ad::Tensor;
using Rng = std::mt19937_64;

// Named trainable tensors, in a stable order used for checkpoints.
class ParamSet {
public:
    void add(std::string name, Tensor t) { items_.emplace_back(std::move(name), std::move(t)); }
    void append(const ParamSet& other, const std::string& prefix);

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<Tensor> tensors() const;
    std::size_t count() const;  // total scalar parameters

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init = false);

    Tensor operator()(const Tensor& x) const;
    ParamSet params() const;
    std::size_t in() const { return in_; }
    std::size_t out() const { return out_; }

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor weight_, bias_;
};

// tanh hidden layers, linear head.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
        bool zero_last = false);

    Tensor operator()(const Tensor& x) const;
    ParamSet params() const;
    std::size_t in() const { return layers_.empty() ? 0 : layers_.front().in(); }
    std::size_t out() const { return layers_.empty() ? 0 : layers_.back().out(); }

private:
    std::vector<Linear> layers_;
};

struct LstmState {
    Tensor h;
    Tensor c;
};

// Gated recurrent cell with separate cell and hidden state.
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(std::size_t in, std::size_t hidden, Rng& rng);

    LstmState zero_state(std::size_t batch) const;
    LstmState operator()(const Tensor& x, const LstmState& state) const;
    ParamSet params() const;
    std::size_t hidden() const { return hidden_; }
    std::size_t in() const { return in_; }

private:
    std::size_t in_ = 0, hidden_ = 0;
    Tensor weight_, bias_;
};

// Runs the cell over a sequence of [batch x in] inputs; returns the final hidden state.
Tensor encode_sequence(const LstmCell& cell, const std::vector<Tensor>& steps);

// Convolutional pooling over a height x width grid of feature vectors:
// 1x1 convolution per cell, two 3x3 convolutions, then a linear projection.
class SocialPool {
public:
    SocialPool() = default;
    SocialPool(std::size_t height, std::size_t width, std::size_t features, std::size_t channels,
               std::size_t out, Rng& rng);

    // grid: [batch x (height*width*features)], flattened (h, w, f).
    Tensor operator()(const Tensor& grid) const;
    ParamSet params() const;
    std::size_t out() const { return head_.out(); }
    std::size_t input_width() const { return height_ * width_ * features_; }

private:
    std::size_t height_ = 0, width_ = 0, features_ = 0, channels_ = 0;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;
    Linear head_;
};

}  // namespace condflow::nn
