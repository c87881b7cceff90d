#pragma once
// Dense double-precision tensors with reverse-mode automatic
// differentiation. Operations record their inputs and a backward rule on
// the output node (define-by-run); Tape linearizes the recorded graph in
// topological order and replays the rules in reverse, accumulating
// gradients exactly once per input per operation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sedkit {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " x " : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {
// Gradcheck's negative control corrupts the sigmoid backward rule through
// this scale factor. Anything but 1.0 makes analytic gradients wrong on
// purpose; production code never touches it.
inline double& sigmoid_backward_scale() {
  static thread_local double s = 1.0;
  return s;
}
}  // namespace detail

class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;  // accumulates into inputs' grad
  };

  Tensor() : node_(std::make_shared<Node>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), 0.0);
    t.node_->grad.assign(t.node_->value.size(), 0.0);
    return t;
  }

  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
  }

  static Tensor from_vector(Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size())
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match " +
                                  std::to_string(values.size()) + " values");
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->grad.assign(t.node_->value.size(), 0.0);
    return t;
  }

  static Tensor scalar(double v) { return from_vector({1}, {v}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  // 2-D accessors (row-major).
  double at(std::size_t r, std::size_t c) const { return node_->value[r * dim(1) + c]; }
  double& at(std::size_t r, std::size_t c) { return node_->value[r * dim(1) + c]; }

  double item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->value[0];
  }

  const char* op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }

  friend Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                        std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

// Creates an op output node. Inputs and the backward rule are recorded
// only when some input requires gradients, so inference graphs stay flat.
inline Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                      std::function<void(Tensor::Node&)> backward) {
  Tensor out;
  out.node_->op = op;
  out.node_->shape = std::move(shape);
  out.node_->value = std::move(value);
  out.node_->grad.assign(out.node_->value.size(), 0.0);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (auto& in : inputs) out.node_->inputs.push_back(in.node());
    out.node_->backward = std::move(backward);
  }
  return out;
}

// Linearized record of the computation reachable from a root tensor.
// The node order is a topological order (inputs precede outputs), so
// replaying the backward rules back to front accumulates each operation's
// contribution exactly once.
class Tape {
 public:
  explicit Tape(const Tensor& root) {
    std::unordered_set<const Tensor::Node*> visited;
    // Iterative post-order DFS; recursion would overflow on long chains.
    std::vector<std::pair<std::shared_ptr<Tensor::Node>, std::size_t>> stack;
    if (visited.insert(root.node().get()).second) stack.emplace_back(root.node(), 0);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        auto child = node->inputs[next++];
        if (visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  const std::vector<std::shared_ptr<Tensor::Node>>& order() const { return order_; }

  // Seeds the root with gradient 1 and sweeps the tape in reverse.
  void backward() const {
    if (order_.empty()) return;
    auto& root = *order_.back();
    if (root.value.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(root.shape));
    root.grad[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
      if ((*it)->backward) (*it)->backward(**it);
  }

 private:
  std::vector<std::shared_ptr<Tensor::Node>> order_;
};

inline void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  Tape(loss).backward();
}

// ---------------------------------------------------------------------------
// Primitive operations
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Tensor::Node& self) {
    auto& ga = self.inputs[0]->grad;
    auto& gb = self.inputs[1]->grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    const auto& gc = self.grad;
    // dA = dC * B^T
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* gcrow = &gc[i * n];
        const double* brow = &bv[p * n];
        for (std::size_t j = 0; j < n; ++j) acc += gcrow[j] * brow[j];
        ga[i * k + p] += acc;
      }
    // dB = A^T * dC
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double aip = av[i * k + p];
        if (aip == 0.0) continue;
        const double* gcrow = &gc[i * n];
        double* gbrow = &gb[p * n];
        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * gcrow[j];
      }
  });
}

namespace detail {
inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.inputs[0]->grad[i] += self.grad[i];
      self.inputs[1]->grad[i] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.inputs[0]->grad[i] += self.grad[i];
      self.inputs[1]->grad[i] -= self.grad[i];
    }
  });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("hadamard", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op("hadamard", a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      self.inputs[0]->grad[i] += self.grad[i] * bv[i];
      self.inputs[1]->grad[i] += self.grad[i] * av[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
  return make_op("scale", a.shape(), std::move(out), {a}, [c](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) self.inputs[0]->grad[i] += c * self.grad[i];
  });
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  return make_op("sigmoid", a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
    const double hook = detail::sigmoid_backward_scale();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      self.inputs[0]->grad[i] += hook * self.grad[i] * s * (1.0 - s);
    }
  });
}

inline Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return make_op("tanh", a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      self.inputs[0]->grad[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  return make_op("relu", a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
    const auto& x = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (x[i] > 0.0) self.inputs[0]->grad[i] += self.grad[i];
  });
}

inline Tensor log(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.data()[i]);
  return make_op("log", a.shape(), std::move(out), {a}, [](Tensor::Node& self) {
    const auto& x = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) self.inputs[0]->grad[i] += self.grad[i] / x[i];
  });
}

// Gradient passes through where the value is strictly inside (lo, hi) and
// is zero where the clamp is active.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, a.data()[i]));
  return make_op("clamp", a.shape(), std::move(out), {a}, [lo, hi](Tensor::Node& self) {
    const auto& x = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (x[i] > lo && x[i] < hi) self.inputs[0]->grad[i] += self.grad[i];
  });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " has " + std::to_string(a.numel()) +
                                " elements, target " + shape_str(shape) + " has " +
                                std::to_string(shape_numel(shape)));
  return make_op("reshape", std::move(shape), a.data(), {a}, [](Tensor::Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) self.inputs[0]->grad[i] += self.grad[i];
  });
}

// 2-D cross-correlation with 3x3 kernels, zero same-padding, plus bias per
// output channel. Input is [C_in x D x T], kernels [C_out x C_in x 3 x 3].
inline Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3)
    throw std::invalid_argument("conv2d: input must be [C x D x T], got " + shape_str(input.shape()));
  if (kernels.rank() != 4 || kernels.dim(2) != 3 || kernels.dim(3) != 3)
    throw std::invalid_argument("conv2d: kernels must be [C_out x C_in x 3 x 3], got " +
                                shape_str(kernels.shape()));
  if (kernels.dim(1) != input.dim(0))
    throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(input.dim(0)) +
                                " channels, kernels expect " + std::to_string(kernels.dim(1)));
  if (bias.numel() != kernels.dim(0))
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias.numel()) +
                                " does not match " + std::to_string(kernels.dim(0)) + " output channels");
  const std::size_t cin = input.dim(0), d = input.dim(1), t = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  std::vector<double> out(cout * d * t);
  const auto& xv = input.data();
  const auto& kv = kernels.data();
  const auto& bv = bias.data();
  for (std::size_t co = 0; co < cout; ++co)
    std::fill(&out[co * d * t], &out[(co + 1) * d * t], bv[co]);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t row = 0; row < d; ++row)
        for (int ki = 0; ki < 3; ++ki) {
          const int in_row = static_cast<int>(row) + ki - 1;
          if (in_row < 0 || in_row >= static_cast<int>(d)) continue;
          const double* xrow = &xv[(ci * d + static_cast<std::size_t>(in_row)) * t];
          double* orow = &out[(co * d + row) * t];
          for (int kj = 0; kj < 3; ++kj) {
            const double w = kv[((co * cin + ci) * 3 + static_cast<std::size_t>(ki)) * 3 +
                                static_cast<std::size_t>(kj)];
            if (w == 0.0) continue;
            const int off = kj - 1;
            const std::size_t t0 = static_cast<std::size_t>(std::max(0, -off));
            const std::size_t t1 = static_cast<std::size_t>(
                std::min(static_cast<int>(t), static_cast<int>(t) - off));
            for (std::size_t tt = t0; tt < t1; ++tt)
              orow[tt] += w * xrow[static_cast<std::size_t>(static_cast<int>(tt) + off)];
          }
        }
  return make_op("conv2d", {cout, d, t}, std::move(out), {input, kernels, bias},
                 [cin, d, t, cout](Tensor::Node& self) {
                   const auto& gy = self.grad;
                   const auto& xv = self.inputs[0]->value;
                   const auto& kv = self.inputs[1]->value;
                   auto& gx = self.inputs[0]->grad;
                   auto& gk = self.inputs[1]->grad;
                   auto& gb = self.inputs[2]->grad;
                   for (std::size_t co = 0; co < cout; ++co) {
                     double acc = 0.0;
                     const double* gplane = &gy[co * d * t];
                     for (std::size_t i = 0; i < d * t; ++i) acc += gplane[i];
                     gb[co] += acc;
                   }
                   for (std::size_t co = 0; co < cout; ++co)
                     for (std::size_t ci = 0; ci < cin; ++ci)
                       for (std::size_t row = 0; row < d; ++row)
                         for (int ki = 0; ki < 3; ++ki) {
                           const int in_row = static_cast<int>(row) + ki - 1;
                           if (in_row < 0 || in_row >= static_cast<int>(d)) continue;
                           const double* __restrict xrow =
                               &xv[(ci * d + static_cast<std::size_t>(in_row)) * t];
                           double* __restrict gxrow = &gx[(ci * d + static_cast<std::size_t>(in_row)) * t];
                           const double* __restrict grow = &gy[(co * d + row) * t];
                           for (int kj = 0; kj < 3; ++kj) {
                             const std::size_t kidx = ((co * cin + ci) * 3 + static_cast<std::size_t>(ki)) * 3 +
                                                      static_cast<std::size_t>(kj);
                             const double w = kv[kidx];
                             const int off = kj - 1;
                             const std::size_t t0 = static_cast<std::size_t>(std::max(0, -off));
                             const std::size_t t1 = static_cast<std::size_t>(
                                 std::min(static_cast<int>(t), static_cast<int>(t) - off));
                             const std::size_t shifted = static_cast<std::size_t>(static_cast<int>(t0) + off);
                             const double* gsrc = grow + t0;
                             const double* xsrc = xrow + shifted;
                             double* gdst = gxrow + shifted;
                             const std::size_t len = t1 - t0;
                             if (w != 0.0)
                               for (std::size_t tt = 0; tt < len; ++tt) gdst[tt] += w * gsrc[tt];
                             double wacc = 0.0;
                             for (std::size_t tt = 0; tt < len; ++tt) wacc += gsrc[tt] * xsrc[tt];
                             gk[kidx] += wacc;
                           }
                         }
                 });
}

// Max pooling along the frequency axis with stride equal to the pool
// width; trailing rows that do not fill a window are dropped. Gradient
// routes to the first maximal element of each window.
inline Tensor maxpool_freq(const Tensor& input, std::size_t pool = 3) {
  if (input.rank() != 3)
    throw std::invalid_argument("maxpool_freq: input must be [C x D x T], got " + shape_str(input.shape()));
  if (pool == 0) throw std::invalid_argument("maxpool_freq: pool must be positive");
  const std::size_t c = input.dim(0), d = input.dim(1), t = input.dim(2);
  if (d < pool)
    throw std::invalid_argument("maxpool_freq: frequency extent " + std::to_string(d) +
                                " is smaller than pool " + std::to_string(pool));
  const std::size_t dout = d / pool;
  std::vector<double> out(c * dout * t);
  std::vector<std::size_t> argmax(c * dout * t);
  const auto& xv = input.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t row = 0; row < dout; ++row)
      for (std::size_t tt = 0; tt < t; ++tt) {
        std::size_t best = (ch * d + row * pool) * t + tt;
        double bestv = xv[best];
        for (std::size_t w = 1; w < pool; ++w) {
          const std::size_t idx = (ch * d + row * pool + w) * t + tt;
          if (xv[idx] > bestv) {
            bestv = xv[idx];
            best = idx;
          }
        }
        const std::size_t oi = (ch * dout + row) * t + tt;
        out[oi] = bestv;
        argmax[oi] = best;
      }
  return make_op("maxpool_freq", {c, dout, t}, std::move(out), {input},
                 [argmax = std::move(argmax)](Tensor::Node& self) {
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     self.inputs[0]->grad[argmax[i]] += self.grad[i];
                 });
}

// Extracts time frame t of a [C x D x T] tensor as a column vector of
// length D*C, ordered frequency-major then channel: v[d*C + c] = x[c][d][t].
inline Tensor frame_column(const Tensor& input, std::size_t t) {
  if (input.rank() != 3)
    throw std::invalid_argument("frame_column: input must be [C x D x T], got " + shape_str(input.shape()));
  const std::size_t c = input.dim(0), d = input.dim(1), tn = input.dim(2);
  if (t >= tn) throw std::invalid_argument("frame_column: frame index " + std::to_string(t) + " out of range");
  std::vector<double> out(d * c);
  const auto& xv = input.data();
  for (std::size_t row = 0; row < d; ++row)
    for (std::size_t ch = 0; ch < c; ++ch) out[row * c + ch] = xv[(ch * d + row) * tn + t];
  return make_op("frame_column", {d * c, 1}, std::move(out), {input}, [c, d, tn, t](Tensor::Node& self) {
    for (std::size_t row = 0; row < d; ++row)
      for (std::size_t ch = 0; ch < c; ++ch)
        self.inputs[0]->grad[(ch * d + row) * tn + t] += self.grad[row * c + ch];
  });
}

// Vertical concatenation of two column vectors.
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != 1 || b.dim(1) != 1)
    throw std::invalid_argument("concat_rows: expects column vectors, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  std::vector<double> out(a.numel() + b.numel());
  std::copy(a.data().begin(), a.data().end(), out.begin());
  std::copy(b.data().begin(), b.data().end(), out.begin() + static_cast<std::ptrdiff_t>(a.numel()));
  const std::size_t na = a.numel();
  return make_op("concat_rows", {a.numel() + b.numel(), 1}, std::move(out), {a, b},
                 [na](Tensor::Node& self) {
                   for (std::size_t i = 0; i < na; ++i) self.inputs[0]->grad[i] += self.grad[i];
                   for (std::size_t i = na; i < self.grad.size(); ++i)
                     self.inputs[1]->grad[i - na] += self.grad[i];
                 });
}

// Stacks T column vectors of length M into an [M x T] matrix.
inline Tensor hstack(const std::vector<Tensor>& columns) {
  if (columns.empty()) throw std::invalid_argument("hstack: no columns");
  const std::size_t m = columns[0].numel();
  for (const auto& c : columns)
    if (c.rank() != 2 || c.dim(1) != 1 || c.numel() != m)
      throw std::invalid_argument("hstack: all columns must be [" + std::to_string(m) + " x 1], got " +
                                  shape_str(c.shape()));
  const std::size_t t = columns.size();
  std::vector<double> out(m * t);
  for (std::size_t j = 0; j < t; ++j)
    for (std::size_t i = 0; i < m; ++i) out[i * t + j] = columns[j].data()[i];
  return make_op("hstack", {m, t}, std::move(out), columns, [m, t](Tensor::Node& self) {
    for (std::size_t j = 0; j < t; ++j)
      for (std::size_t i = 0; i < m; ++i) self.inputs[j]->grad[i] += self.grad[i * t + j];
  });
}

inline Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_op("sum_all", {1}, {acc}, {a}, [](Tensor::Node& self) {
    const double g = self.grad[0];
    for (auto& gi : self.inputs[0]->grad) gi += g;
  });
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

// Compares the analytic gradient of a scalar function against central
// finite differences. Returns the max over components of
// |analytic - central| / max(1, |analytic|).
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  Tensor probe = Tensor::from_vector(x.shape(), x.data());
  probe.set_requires_grad(true);
  Tensor y = f(probe);
  if (y.numel() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
  backward(y);
  const std::vector<double> analytic = probe.grad();

  Tensor work = Tensor::from_vector(x.shape(), x.data());
  double worst = 0.0;
  for (std::size_t i = 0; i < work.numel(); ++i) {
    const double saved = work.data()[i];
    work.data()[i] = saved + step;
    const double fp = f(work).item();
    work.data()[i] = saved - step;
    const double fm = f(work).item();
    work.data()[i] = saved;
    const double fd = (fp - fm) / (2.0 * step);
    if (!std::isfinite(fd) || !std::isfinite(analytic[i]))
      throw std::runtime_error("grad_check: non-finite value at component " + std::to_string(i));
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace sedkit
