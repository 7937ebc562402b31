#include "condflow/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "condflow/errors.hpp"
#include "condflow/kernels/gemm.hpp"

namespace condflow::ad {

namespace detail {
std::uint64_t next_seq() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

thread_local bool t_grad_enabled = true;

std::string shape_str(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

NodePtr make_node(std::size_t rows, std::size_t cols, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    n->seq = detail::next_seq();
    return n;
}

// Wraps a freshly computed value; attaches history when any parent needs it.
Tensor record(std::size_t rows, std::size_t cols, std::vector<double> value,
              std::vector<NodePtr> parents, std::function<void(Node&)> backward) {
    auto n = make_node(rows, cols, std::move(value));
    if (t_grad_enabled) {
        const bool any = std::any_of(parents.begin(), parents.end(),
                                     [](const NodePtr& p) { return p->requires_grad; });
        if (any) {
            n->requires_grad = true;
            n->is_leaf = false;
            n->parents = std::move(parents);
            n->backward = std::move(backward);
        }
    }
    return Tensor(std::move(n));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
}

struct Broadcast {
    std::size_t rows, cols;
    std::size_t ar, ac, br, bc;
    std::size_t a_index(std::size_t i, std::size_t j) const {
        return (ar == 1 ? 0 : i) * ac + (ac == 1 ? 0 : j);
    }
    std::size_t b_index(std::size_t i, std::size_t j) const {
        return (br == 1 ? 0 : i) * bc + (bc == 1 ? 0 : j);
    }
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    auto dim = [&](std::size_t x, std::size_t y) {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.rows(), a.cols()) +
                         " and " + shape_str(b.rows(), b.cols()));
    };
    return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols()), a.rows(), a.cols(), b.rows(), b.cols()};
}

// f(a, b) -> value; da(a, b) and db(a, b) are the partials.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
    const Broadcast bc = broadcast(a, b, op);
    std::vector<double> out(bc.rows * bc.cols);
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < bc.rows; ++i)
        for (std::size_t j = 0; j < bc.cols; ++j)
            out[i * bc.cols + j] = f(av[bc.a_index(i, j)], bv[bc.b_index(i, j)]);
    return record(bc.rows, bc.cols, std::move(out), {a.node(), b.node()},
                  [bc, da, db](Node& self) {
                      Node& pa = *self.parents[0];
                      Node& pb = *self.parents[1];
                      if (pa.requires_grad) pa.ensure_grad();
                      if (pb.requires_grad) pb.ensure_grad();
                      for (std::size_t i = 0; i < bc.rows; ++i) {
                          for (std::size_t j = 0; j < bc.cols; ++j) {
                              const double g = self.grad[i * bc.cols + j];
                              const std::size_t ia = bc.a_index(i, j);
                              const std::size_t ib = bc.b_index(i, j);
                              const double x = pa.value[ia];
                              const double y = pb.value[ib];
                              if (pa.requires_grad) pa.grad[ia] += g * da(x, y);
                              if (pb.requires_grad) pb.grad[ib] += g * db(x, y);
                          }
                      }
                  });
}

// f(x) -> y; df(x, y) -> dy/dx.
template <class F, class DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
    require_defined(x, op);
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return record(x.rows(), x.cols(), std::move(out), {x.node()}, [df](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.value.size(); ++i)
            p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
    });
}

double stable_softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> data,
                    bool requires_grad) {
    if (data.size() != rows * cols)
        throw ShapeError("tensor: " + std::to_string(data.size()) + " values for shape " +
                         shape_str(rows, cols));
    auto n = make_node(rows, cols, std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_shape(const Shape& shape, std::vector<double> data, bool requires_grad) {
    switch (shape.size()) {
        case 0: return from(1, 1, std::move(data), requires_grad);
        case 1: return from(1, shape[0], std::move(data), requires_grad);
        case 2: return from(shape[0], shape[1], std::move(data), requires_grad);
        default: throw ShapeError("tensor: only rank <= 2 shapes are supported");
    }
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
    const std::size_t n = data.size();
    return from(1, n, std::move(data), requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item: tensor is " + shape_str(rows(), cols()));
    return node_->value[0];
}

void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

std::span<double> Tensor::mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::is_finite() const {
    return std::all_of(node_->value.begin(), node_->value.end(),
                       [](double v) { return std::isfinite(v); });
}

std::vector<NodePtr> tape_of(const Tensor& loss) {
    require_defined(loss, "backward");
    std::vector<NodePtr> order;
    if (!loss.requires_grad()) return order;
    std::unordered_set<const Node*> seen;
    std::vector<NodePtr> stack{loss.node()};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        NodePtr n = std::move(stack.back());
        stack.pop_back();
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
        order.push_back(std::move(n));
    }
    // Creation order is a valid topological order of a define-by-run graph.
    std::sort(order.begin(), order.end(),
              [](const NodePtr& x, const NodePtr& y) { return x->seq > y->seq; });
    return order;
}

void Tensor::backward() const {
    if (!defined() || size() != 1)
        throw ShapeError("backward: loss must be a 1x1 tensor");
    const auto order = tape_of(*this);
    for (const auto& n : order) {
        if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
    }
    if (node_->is_leaf) {
        if (node_->requires_grad) {
            node_->ensure_grad();
            node_->grad[0] += 1.0;
        }
        return;
    }
    node_->grad[0] = 1.0;
    for (const auto& n : order) {
        if (!n->is_leaf && n->backward) n->backward(*n);
    }
}

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() noexcept { return t_grad_enabled; }

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data())
        if (v == 0.0) throw DomainError("div: division by zero");
    return binary(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) {
    return unary(x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, "scale", [factor](double v) { return v * factor; },
        [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(
        x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    require_defined(x, "log");
    for (double v : x.data())
        if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
    return unary(
        x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) {
    return unary(x, "softplus", stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor square(const Tensor& x) {
    return unary(
        x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor reciprocal(const Tensor& x) {
    require_defined(x, "reciprocal");
    for (double v : x.data())
        if (v == 0.0) throw DomainError("reciprocal: zero input");
    return unary(
        x, "reciprocal", [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

// ---------------------------------------------------------------- matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " x " +
                         shape_str(b.rows(), b.cols()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n);
    kernels::gemm({false, false, m, n, k, false}, a.data(), b.data(), out);
    return record(m, n, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            // dA = dC * B^T
            kernels::gemm({false, true, m, k, n, true}, self.grad, pb.value, pa.grad);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            // dB = A^T * dC
            kernels::gemm({true, false, k, n, m, true}, pa.value, self.grad, pb.grad);
        }
    });
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    double s = 0.0;
    for (double v : x.data()) s += v;
    return record(1, 1, {s}, {x.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (double& g : p.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    require_defined(x, "mean");
    if (x.size() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_cols(const Tensor& x) {
    require_defined(x, "sum_cols");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r, 0.0);
    const auto v = x.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += v[i * c + j];
    return record(r, 1, std::move(out), {x.node()}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[i];
    });
}

Tensor sum_rows(const Tensor& x) {
    require_defined(x, "sum_rows");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(c, 0.0);
    const auto v = x.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += v[i * c + j];
    return record(1, c, std::move(out), {x.node()}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j];
    });
}

Tensor logsumexp_cols(const Tensor& x) {
    require_defined(x, "logsumexp_cols");
    const std::size_t r = x.rows(), c = x.cols();
    if (c == 0) throw ShapeError("logsumexp_cols: no columns");
    std::vector<double> out(r);
    const auto v = x.data();
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = v.data() + i * c;
        const double m = *std::max_element(row, row + c);
        if (!std::isfinite(m)) {
            out[i] = m;
            continue;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
        out[i] = m + std::log(s);
    }
    return record(r, 1, std::move(out), {x.node()}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                p.grad[i * c + j] += self.grad[i] * std::exp(p.value[i * c + j] - self.value[i]);
    });
}

// ---------------------------------------------------------------- structure

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    std::vector<NodePtr> parents;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        require_defined(p, "concat_cols");
        if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch");
        offsets.push_back(c);
        c += p.cols();
        parents.push_back(p.node());
    }
    std::vector<double> out(r * c);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto v = parts[k].data();
        const std::size_t pc = parts[k].cols();
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(v.data() + i * pc, pc, out.data() + i * c + offsets[k]);
    }
    return record(r, c, std::move(out), std::move(parents), [r, c, offsets](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < p.cols; ++j)
                    p.grad[i * p.cols + j] += self.grad[i * c + offsets[k] + j];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    std::vector<NodePtr> parents;
    std::vector<double> out;
    for (const auto& p : parts) {
        require_defined(p, "concat_rows");
        if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
        r += p.rows();
        parents.push_back(p.node());
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return record(r, c, std::move(out), std::move(parents), [](Node& self) {
        std::size_t offset = 0;
        for (auto& pp : self.parents) {
            Node& p = *pp;
            if (p.requires_grad) {
                p.ensure_grad();
                for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += self.grad[offset + i];
            }
            offset += p.value.size();
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    require_defined(x, "slice_cols");
    if (begin > end || end > x.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.rows(), x.cols()));
    const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
    std::vector<double> out(r * w);
    const auto v = x.data();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(v.data() + i * c + begin, w, out.data() + i * w);
    return record(r, w, std::move(out), {x.node()}, [r, c, w, begin](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) p.grad[i * c + begin + j] += self.grad[i * w + j];
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    require_defined(x, "slice_rows");
    if (begin > end || end > x.rows()) throw ShapeError("slice_rows: range outside tensor");
    const std::size_t c = x.cols();
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end * c));
    return record(end - begin, c, std::move(out), {x.node()}, [begin, c](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[begin * c + i] += self.grad[i];
    });
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
    require_defined(x, "repeat_rows");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out;
    out.reserve(r * c * times);
    const auto v = x.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), v.begin() + i * c, v.begin() + (i + 1) * c);
    return record(r * times, c, std::move(out), {x.node()}, [r, c, times](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < times; ++t)
                for (std::size_t j = 0; j < c; ++j)
                    p.grad[i * c + j] += self.grad[(i * times + t) * c + j];
    });
}

// ---------------------------------------------------------------- conv2d

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& g) {
    require_defined(input, "conv2d");
    const std::size_t cells = g.height * g.width;
    if (g.kernel % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
    if (input.cols() != cells * g.in_channels)
        throw ShapeError("conv2d: input has " + std::to_string(input.cols()) + " columns, expected " +
                         std::to_string(cells * g.in_channels));
    if (weight.rows() != g.kernel * g.kernel * g.in_channels || weight.cols() != g.out_channels)
        throw ShapeError("conv2d: weight shape " + shape_str(weight.rows(), weight.cols()));
    if (bias.rows() != 1 || bias.cols() != g.out_channels) throw ShapeError("conv2d: bias shape");

    const std::size_t batch = input.rows();
    const std::size_t patch = g.kernel * g.kernel * g.in_channels;
    const auto half = static_cast<std::ptrdiff_t>(g.kernel / 2);
    // im2col: (batch*cells) x patch
    std::vector<double> cols(batch * cells * patch, 0.0);
    const auto in = input.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t y = 0; y < g.height; ++y) {
            for (std::size_t x = 0; x < g.width; ++x) {
                double* dst = cols.data() + ((b * cells) + y * g.width + x) * patch;
                for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
                    for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
                        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                        const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
                        const std::size_t k = static_cast<std::size_t>((dy + half) * static_cast<std::ptrdiff_t>(g.kernel) + (dx + half));
                        if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(g.height) ||
                            sx >= static_cast<std::ptrdiff_t>(g.width))
                            continue;
                        const double* src = in.data() + b * input.cols() +
                                            (static_cast<std::size_t>(sy) * g.width + static_cast<std::size_t>(sx)) * g.in_channels;
                        std::copy_n(src, g.in_channels, dst + k * g.in_channels);
                    }
                }
            }
        }
    }
    std::vector<double> out(batch * cells * g.out_channels);
    kernels::gemm({false, false, batch * cells, g.out_channels, patch, false}, cols, weight.data(), out);
    const auto bv = bias.data();
    for (std::size_t r = 0; r < batch * cells; ++r)
        for (std::size_t o = 0; o < g.out_channels; ++o) out[r * g.out_channels + o] += bv[o];

    return record(batch, cells * g.out_channels, std::move(out), {input.node(), weight.node(), bias.node()},
                  [g, batch, cells, patch, half, cols = std::move(cols)](Node& self) {
                      Node& pin = *self.parents[0];
                      Node& pw = *self.parents[1];
                      Node& pb = *self.parents[2];
                      const std::size_t rows = batch * cells;
                      if (pw.requires_grad) {
                          pw.ensure_grad();
                          kernels::gemm({true, false, patch, g.out_channels, rows, true}, cols, self.grad, pw.grad);
                      }
                      if (pb.requires_grad) {
                          pb.ensure_grad();
                          for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t o = 0; o < g.out_channels; ++o)
                                  pb.grad[o] += self.grad[r * g.out_channels + o];
                      }
                      if (pin.requires_grad) {
                          pin.ensure_grad();
                          std::vector<double> dcols(rows * patch, 0.0);
                          kernels::gemm({false, true, rows, patch, g.out_channels, false}, self.grad, pw.value, dcols);
                          for (std::size_t b = 0; b < batch; ++b) {
                              for (std::size_t y = 0; y < g.height; ++y) {
                                  for (std::size_t x = 0; x < g.width; ++x) {
                                      const double* src = dcols.data() + ((b * cells) + y * g.width + x) * patch;
                                      for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
                                          for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
                                              const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                                              const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
                                              if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(g.height) ||
                                                  sx >= static_cast<std::ptrdiff_t>(g.width))
                                                  continue;
                                              const std::size_t k = static_cast<std::size_t>((dy + half) * static_cast<std::ptrdiff_t>(g.kernel) + (dx + half));
                                              double* dst = pin.grad.data() + b * pin.cols +
                                                            (static_cast<std::size_t>(sy) * g.width + static_cast<std::size_t>(sx)) * g.in_channels;
                                              for (std::size_t ch = 0; ch < g.in_channels; ++ch)
                                                  dst[ch] += src[k * g.in_channels + ch];
                                          }
                                      }
                                  }
                              }
                          }
                      }
                  });
}

}  // namespace condflow::ad
