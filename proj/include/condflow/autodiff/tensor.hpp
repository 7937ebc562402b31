#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

// Define-by-run reverse-mode automatic differentiation over dense 2-D arrays
// of doubles. Every operation that touches a tensor requiring gradients
// records a node; backward() replays the recorded nodes in reverse creation
// order. The graph is owned by the tensors themselves, so dropping the loss
// releases the whole step's tape.
namespace condflow::ad {

using Shape = std::vector<std::size_t>;

namespace detail {

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

std::uint64_t next_seq();

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);
    // Shapes of rank 0..2; rank 0 and 1 are stored as a single row.
    static Tensor from_shape(const Shape& shape, std::vector<double> data,
                             bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor row(std::vector<double> data, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    std::size_t rows() const noexcept { return node_->rows; }
    std::size_t cols() const noexcept { return node_->cols; }
    std::size_t size() const noexcept { return node_->value.size(); }
    Shape shape() const { return {rows(), cols()}; }

    std::span<const double> data() const noexcept { return node_->value; }
    std::span<double> mutable_data() noexcept { return node_->value; }
    double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    double item() const;

    bool requires_grad() const noexcept { return node_->requires_grad; }
    void set_requires_grad(bool on);
    bool has_grad() const noexcept { return node_->grad.size() == node_->value.size(); }
    std::span<const double> grad() const noexcept { return node_->grad; }
    std::span<double> mutable_grad();
    void zero_grad();

    // False when any entry is NaN or infinite.
    bool is_finite() const;

    // Accumulates d(this)/d(leaf) into every reachable leaf requiring grad.
    // This tensor must be 1x1.
    void backward() const;

    // Same storage values, no history.
    Tensor detach() const;

    // Internal: used by operation implementations.
    const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

// Topologically ordered view of the graph behind a scalar, in reverse
// creation order; what backward() walks.
std::vector<std::shared_ptr<detail::Node>> tape_of(const Tensor& loss);

// Elementwise binary ops broadcast any dimension of size 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // DomainError on entries <= 0
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);
Tensor reciprocal(const Tensor& x);  // DomainError on zero entries

Tensor sum(const Tensor& x);         // -> 1x1
Tensor mean(const Tensor& x);        // -> 1x1
Tensor sum_cols(const Tensor& x);    // row-wise sum -> rows x 1
Tensor sum_rows(const Tensor& x);    // column-wise sum -> 1 x cols
Tensor logsumexp_cols(const Tensor& x);  // row-wise -> rows x 1

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// Repeats each row `times` times consecutively.
Tensor repeat_rows(const Tensor& x, std::size_t times);

struct Conv2dGeometry {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;  // odd; zero padding keeps height x width
};

// Input rows are images flattened as (h, w, c). weight is
// (kernel*kernel*in_channels) x out_channels, bias 1 x out_channels.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& geometry);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }

}  // namespace condflow::ad
