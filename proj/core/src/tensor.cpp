#include "scriptor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace scriptor {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

thread_local Tape* g_active_tape = nullptr;

NodePtr make_node(const Shape& shape, bool requires_grad) {
  for (auto d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  n->requires_grad = requires_grad;
  return n;
}

// Runs the forward closure once, records it with the backward closure on the
// active tape (if any), and returns the output handle.
Tensor make_op(std::vector<NodePtr> inputs, NodePtr out, std::function<void()> forward,
               std::function<void()> backward) {
  forward();
  if (Tape* t = g_active_tape) {
    out->tape = t;
    t->record(std::move(inputs), out, std::move(forward), std::move(backward));
  }
  return Tensor(out);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

// ---- Tensor ----

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(make_node(shape, requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  auto n = make_node(shape, requires_grad);
  std::fill(n->data.begin(), n->data.end(), value);
  return Tensor(n);
}

Tensor Tensor::from(std::vector<double> data, const Shape& shape, bool requires_grad) {
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw DimensionError("from: data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto n = make_node(shape, requires_grad);
  n->data = std::move(data);
  return Tensor(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({value}, {1}, requires_grad);
}

Tensor Tensor::randn(const Shape& shape, RngStream& rng, double stddev, bool requires_grad) {
  auto n = make_node(shape, requires_grad);
  for (auto& v : n->data) v = rng.normal(0.0, stddev);
  return Tensor(n);
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::value() const {
  if (numel() != 1) throw ContractError("value(): tensor is not scalar, shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
  const Shape& s = node_->shape;
  if (idx.size() != s.size()) throw DimensionError("at(): index rank mismatch");
  std::int64_t off = 0;
  std::size_t i = 0;
  for (auto v : idx) {
    if (v < 0 || v >= s[i]) throw DimensionError("at(): index out of range");
    off = off * s[i] + v;
    ++i;
  }
  return node_->data[static_cast<std::size_t>(off)];
}

// ---- Tape ----

void Tape::record(std::vector<NodePtr> inputs, NodePtr output, std::function<void()> forward,
                  std::function<void()> backward) {
  if (consumed_) throw ContractError("tape already consumed by backward(); reset() it first");
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(forward),
                           std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (loss.tape() != this) {
    throw ContractError("backward: loss was not produced on this tape");
  }
  if (consumed_) throw ContractError("backward: tape already consumed; reset() it first");
  for (auto& e : entries_) {
    e.output->ensure_grad();
    for (auto& in : e.inputs) in->ensure_grad();
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  consumed_ = true;
}

void Tape::replay() {
  for (auto& e : entries_) e.forward();
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

// ---- elementwise ----

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          void (*fwd)(const double*, const double*, double*, std::size_t),
                          void (*bwd)(const double*, const double*, const double*, const double*,
                                      double*, double*, std::size_t)) {
  check_same_shape(a, b, name);
  auto an = a.node(), bn = b.node();
  auto out = make_node(a.shape(), false);
  std::size_t n = an->data.size();
  auto forward = [an, bn, out, n, fwd]() { fwd(an->data.data(), bn->data.data(), out->data.data(), n); };
  auto backward = [an, bn, out, n, bwd]() {
    bwd(an->data.data(), bn->data.data(), out->data.data(), out->grad.data(), an->grad.data(),
        bn->grad.data(), n);
  };
  return make_op({an, bn}, out, forward, backward);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "add",
      [](const double* x, const double* y, double* o, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] + y[i];
      },
      [](const double*, const double*, const double*, const double* g, double* gx, double* gy,
         std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
          gx[i] += g[i];
          gy[i] += g[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "sub",
      [](const double* x, const double* y, double* o, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] - y[i];
      },
      [](const double*, const double*, const double*, const double* g, double* gx, double* gy,
         std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
          gx[i] += g[i];
          gy[i] -= g[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "mul",
      [](const double* x, const double* y, double* o, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) o[i] = x[i] * y[i];
      },
      [](const double* x, const double* y, const double*, const double* g, double* gx, double* gy,
         std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
          gx[i] += g[i] * y[i];
          gy[i] += g[i] * x[i];
        }
      });
}

namespace {

Tensor elementwise_unary(const Tensor& a, std::function<double(double)> f,
                         std::function<double(double, double)> dfdx_from_x_y) {
  auto an = a.node();
  auto out = make_node(a.shape(), false);
  std::size_t n = an->data.size();
  auto forward = [an, out, n, f]() {
    for (std::size_t i = 0; i < n; ++i) out->data[i] = f(an->data[i]);
  };
  auto backward = [an, out, n, dfdx_from_x_y]() {
    for (std::size_t i = 0; i < n; ++i) {
      an->grad[i] += out->grad[i] * dfdx_from_x_y(an->data[i], out->data[i]);
    }
  };
  return make_op({an}, out, forward, backward);
}

}  // namespace

Tensor add_scalar(const Tensor& a, double c) {
  return elementwise_unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return elementwise_unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                           [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                           [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_t(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::exp(x); },
                           [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::log(x); },
                           [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::sqrt(x); },
                           [](double, double y) { return 0.5 / y; });
}

Tensor abs_t(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return std::fabs(x); },
                           [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor reciprocal(const Tensor& a) {
  return elementwise_unary(a, [](double x) { return 1.0 / x; },
                           [](double, double y) { return -y * y; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: scale must be scalar");
  auto xn = x.node(), sn = s.node();
  auto out = make_node(x.shape(), false);
  std::size_t n = xn->data.size();
  auto forward = [xn, sn, out, n]() {
    double c = sn->data[0];
    for (std::size_t i = 0; i < n; ++i) out->data[i] = xn->data[i] * c;
  };
  auto backward = [xn, sn, out, n]() {
    double c = sn->data[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xn->grad[i] += out->grad[i] * c;
      acc += out->grad[i] * xn->data[i];
    }
    sn->grad[0] += acc;
  };
  return make_op({xn, sn}, out, forward, backward);
}

// ---- structure ----

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto an = a.node();
  auto out = make_node(shape, false);
  std::size_t n = an->data.size();
  auto forward = [an, out, n]() { std::copy_n(an->data.data(), n, out->data.data()); };
  auto backward = [an, out, n]() {
    for (std::size_t i = 0; i < n; ++i) an->grad[i] += out->grad[i];
  };
  return make_op({an}, out, forward, backward);
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose2d: need rank-2, got " + shape_str(a.shape()));
  std::int64_t r = a.dim(0), c = a.dim(1);
  auto an = a.node();
  auto out = make_node({c, r}, false);
  auto forward = [an, out, r, c]() {
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) out->data[j * r + i] = an->data[i * c + j];
  };
  auto backward = [an, out, r, c]() {
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) an->grad[i * c + j] += out->grad[j * r + i];
  };
  return make_op({an}, out, forward, backward);
}

namespace {

// Collapse a shape around `axis` into [outer, len, inner].
void axis_split(const Shape& s, int axis, std::int64_t& outer, std::int64_t& len,
                std::int64_t& inner) {
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  outer = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  len = s[axis];
  inner = 1;
  for (int i = axis + 1; i < static_cast<int>(s.size()); ++i) inner *= s[i];
}

}  // namespace

Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t length) {
  std::int64_t outer, len, inner;
  axis_split(a.shape(), axis, outer, len, inner);
  if (start < 0 || length < 0 || start + length > len) {
    throw DimensionError("narrow: range [" + std::to_string(start) + "," +
                         std::to_string(start + length) + ") out of axis length " +
                         std::to_string(len));
  }
  Shape os = a.shape();
  os[axis] = length;
  auto an = a.node();
  auto out = make_node(os, false);
  auto forward = [an, out, outer, len, inner, start, length]() {
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = an->data.data() + (o * len + start) * inner;
      double* dst = out->data.data() + o * length * inner;
      std::copy_n(src, length * inner, dst);
    }
  };
  auto backward = [an, out, outer, len, inner, start, length]() {
    for (std::int64_t o = 0; o < outer; ++o) {
      double* gsrc = an->grad.data() + (o * len + start) * inner;
      const double* gdst = out->grad.data() + o * length * inner;
      for (std::int64_t i = 0; i < length * inner; ++i) gsrc[i] += gdst[i];
    }
  };
  return make_op({an}, out, forward, backward);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  Shape base = parts[0].shape();
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != static_cast<int>(base.size())) throw DimensionError("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.shape()[i] != base[i]) {
        throw DimensionError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(base) + " on axis " + std::to_string(i));
      }
    }
    std::int64_t o, l, in;
    axis_split(p.shape(), axis, o, l, in);
    total += l;
  }
  Shape os = base;
  os[axis] = total;
  auto out = make_node(os, false);
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) inputs.push_back(p.node());
  std::int64_t outer, olen, inner;
  axis_split(os, axis, outer, olen, inner);
  std::vector<std::int64_t> lens, offs;
  std::int64_t run = 0;
  for (const auto& p : parts) {
    std::int64_t o, l, in;
    axis_split(p.shape(), axis, o, l, in);
    lens.push_back(l);
    offs.push_back(run);
    run += l;
  }
  auto forward = [inputs, out, outer, olen, inner, lens, offs]() {
    for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
      std::int64_t l = lens[pi], off = offs[pi];
      for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = inputs[pi]->data.data() + o * l * inner;
        double* dst = out->data.data() + (o * olen + off) * inner;
        std::copy_n(src, l * inner, dst);
      }
    }
  };
  auto backward = [inputs, out, outer, olen, inner, lens, offs]() {
    for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
      std::int64_t l = lens[pi], off = offs[pi];
      for (std::int64_t o = 0; o < outer; ++o) {
        double* gsrc = inputs[pi]->grad.data() + o * l * inner;
        const double* gdst = out->grad.data() + (o * olen + off) * inner;
        for (std::int64_t i = 0; i < l * inner; ++i) gsrc[i] += gdst[i];
      }
    }
  };
  return make_op(std::move(inputs), out, forward, backward);
}

Tensor broadcast_rows(const Tensor& v, std::int64_t rows) {
  if (v.rank() != 1) throw DimensionError("broadcast_rows: need rank-1, got " + shape_str(v.shape()));
  std::int64_t d = v.dim(0);
  auto vn = v.node();
  auto out = make_node({rows, d}, false);
  auto forward = [vn, out, rows, d]() {
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy_n(vn->data.data(), d, out->data.data() + r * d);
    }
  };
  auto backward = [vn, out, rows, d]() {
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* g = out->grad.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) vn->grad[j] += g[j];
    }
  };
  return make_op({vn}, out, forward, backward);
}

// ---- reductions ----

Tensor sum_all(const Tensor& a) {
  auto an = a.node();
  auto out = make_node({1}, false);
  std::size_t n = an->data.size();
  auto forward = [an, out, n]() {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += an->data[i];
    out->data[0] = acc;
  };
  auto backward = [an, out, n]() {
    double g = out->grad[0];
    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g;
  };
  return make_op({an}, out, forward, backward);
}

Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean_all: empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_rows(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("mean_rows: need rank-2, got " + shape_str(a.shape()));
  std::int64_t t = a.dim(0), d = a.dim(1);
  if (t == 0) throw DimensionError("mean_rows: zero rows");
  auto an = a.node();
  auto out = make_node({d}, false);
  auto forward = [an, out, t, d]() {
    std::fill(out->data.begin(), out->data.end(), 0.0);
    for (std::int64_t r = 0; r < t; ++r) {
      const double* src = an->data.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) out->data[j] += src[j];
    }
    for (std::int64_t j = 0; j < d; ++j) out->data[j] /= static_cast<double>(t);
  };
  auto backward = [an, out, t, d]() {
    double inv = 1.0 / static_cast<double>(t);
    for (std::int64_t r = 0; r < t; ++r) {
      double* g = an->grad.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) g[j] += out->grad[j] * inv;
    }
  };
  return make_op({an}, out, forward, backward);
}

Tensor global_avg_pool2d(const Tensor& a) {
  if (a.rank() != 3) throw DimensionError("global_avg_pool2d: need [c,h,w], got " + shape_str(a.shape()));
  std::int64_t c = a.dim(0), hw = a.dim(1) * a.dim(2);
  if (hw == 0) throw DimensionError("global_avg_pool2d: empty spatial extent");
  auto an = a.node();
  auto out = make_node({c}, false);
  auto forward = [an, out, c, hw]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* src = an->data.data() + ch * hw;
      double acc = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
      out->data[ch] = acc / static_cast<double>(hw);
    }
  };
  auto backward = [an, out, c, hw]() {
    double inv = 1.0 / static_cast<double>(hw);
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double g = out->grad[ch] * inv;
      double* gd = an->grad.data() + ch * hw;
      for (std::int64_t i = 0; i < hw; ++i) gd[i] += g;
    }
  };
  return make_op({an}, out, forward, backward);
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: need rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto an = a.node(), bn = b.node();
  auto out = make_node({m, n}, false);
  auto forward = [an, bn, out, m, k, n]() {
    const double* A = an->data.data();
    const double* B = bn->data.data();
    double* O = out->data.data();
    std::fill(out->data.begin(), out->data.end(), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t p = 0; p < k; ++p) {
        double av = A[i * k + p];
        const double* brow = B + p * n;
        double* orow = O + i * n;
        for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  };
  auto backward = [an, bn, out, m, k, n]() {
    const double* A = an->data.data();
    const double* B = bn->data.data();
    const double* G = out->grad.data();
    double* GA = an->grad.data();
    double* GB = bn->grad.data();
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t p = 0; p < k; ++p) {
        const double* brow = B + p * n;
        const double* grow = G + i * n;
        double acc = 0.0;
        for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        GA[i * k + p] += acc;
      }
    }
    for (std::int64_t p = 0; p < k; ++p) {
      for (std::int64_t i = 0; i < m; ++i) {
        double av = A[i * k + p];
        const double* grow = G + i * n;
        double* gbrow = GB + p * n;
        for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
      }
    }
  };
  return make_op({an, bn}, out, forward, backward);
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0)) {
    throw DimensionError("add_bias: need [t,d]+[d], got " + shape_str(x.shape()) + " and " +
                         shape_str(b.shape()));
  }
  std::int64_t t = x.dim(0), d = x.dim(1);
  auto xn = x.node(), bn = b.node();
  auto out = make_node({t, d}, false);
  auto forward = [xn, bn, out, t, d]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* src = xn->data.data() + r * d;
      double* dst = out->data.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) dst[j] = src[j] + bn->data[j];
    }
  };
  auto backward = [xn, bn, out, t, d]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* g = out->grad.data() + r * d;
      double* gx = xn->grad.data() + r * d;
      for (std::int64_t j = 0; j < d; ++j) {
        gx[j] += g[j];
        bn->grad[j] += g[j];
      }
    }
  };
  return make_op({xn, bn}, out, forward, backward);
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
  if (x.rank() != 3 || s.rank() != 1 || x.dim(0) != s.dim(0)) {
    throw DimensionError("scale_channels: need [c,h,w]*[c], got " + shape_str(x.shape()) + " and " +
                         shape_str(s.shape()));
  }
  std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto xn = x.node(), sn = s.node();
  auto out = make_node(x.shape(), false);
  auto forward = [xn, sn, out, c, hw]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double g = sn->data[ch];
      const double* src = xn->data.data() + ch * hw;
      double* dst = out->data.data() + ch * hw;
      for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * g;
    }
  };
  auto backward = [xn, sn, out, c, hw]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double g = sn->data[ch];
      const double* src = xn->data.data() + ch * hw;
      const double* go = out->grad.data() + ch * hw;
      double* gx = xn->grad.data() + ch * hw;
      double acc = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) {
        gx[i] += go[i] * g;
        acc += go[i] * src[i];
      }
      sn->grad[ch] += acc;
    }
  };
  return make_op({xn, sn}, out, forward, backward);
}

// ---- convolution / pooling ----

namespace {

std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, int stride, int pad, const char* what) {
  std::int64_t eff = in + 2 * pad;
  if (k > eff) {
    throw DimensionError(std::string(what) + ": kernel extent " + std::to_string(k) +
                         " exceeds padded input " + std::to_string(eff));
  }
  return (eff - k) / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride_h, int stride_w,
              int pad_h, int pad_w) {
  if (x.rank() != 3) throw DimensionError("conv2d: input must be [c,h,w], got " + shape_str(x.shape()));
  if (k.rank() != 4) throw DimensionError("conv2d: kernel must be [oc,ic,kh,kw], got " + shape_str(k.shape()));
  if (stride_h < 1 || stride_w < 1) throw ParameterError("conv2d: stride must be >= 1");
  if (pad_h < 0 || pad_w < 0) throw ParameterError("conv2d: padding must be >= 0");
  std::int64_t ic = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  std::int64_t oc = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != ic) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(k.dim(1)) + " input channels, got " +
                         std::to_string(ic));
  }
  bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != oc)) {
    throw DimensionError("conv2d: bias must be [oc], got " + shape_str(b.shape()));
  }
  std::int64_t oh = conv_out_dim(ih, kh, stride_h, pad_h, "conv2d");
  std::int64_t ow = conv_out_dim(iw, kw, stride_w, pad_w, "conv2d");
  auto xn = x.node(), kn = k.node();
  NodePtr bn = has_bias ? b.node() : nullptr;
  auto out = make_node({oc, oh, ow}, false);
  auto forward = [=]() {
    const double* X = xn->data.data();
    const double* K = kn->data.data();
    double* O = out->data.data();
    for (std::int64_t o = 0; o < oc; ++o) {
      double bias = bn ? bn->data[o] : 0.0;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double acc = bias;
          for (std::int64_t c = 0; c < ic; ++c) {
            const double* xc = X + c * ih * iw;
            const double* kc = K + ((o * ic + c) * kh) * kw;
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              std::int64_t iy = oy * stride_h - pad_h + ky;
              if (iy < 0 || iy >= ih) continue;
              const double* xrow = xc + iy * iw;
              const double* krow = kc + ky * kw;
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                std::int64_t ix = ox * stride_w - pad_w + kx;
                if (ix < 0 || ix >= iw) continue;
                acc += xrow[ix] * krow[kx];
              }
            }
          }
          O[(o * oh + oy) * ow + ox] = acc;
        }
      }
    }
  };
  auto backward = [=]() {
    const double* X = xn->data.data();
    const double* K = kn->data.data();
    const double* G = out->grad.data();
    double* GX = xn->grad.data();
    double* GK = kn->grad.data();
    for (std::int64_t o = 0; o < oc; ++o) {
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double g = G[(o * oh + oy) * ow + ox];
          if (bn) bn->grad[o] += g;
          for (std::int64_t c = 0; c < ic; ++c) {
            const double* xc = X + c * ih * iw;
            double* gxc = GX + c * ih * iw;
            const double* kc = K + ((o * ic + c) * kh) * kw;
            double* gkc = GK + ((o * ic + c) * kh) * kw;
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              std::int64_t iy = oy * stride_h - pad_h + ky;
              if (iy < 0 || iy >= ih) continue;
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                std::int64_t ix = ox * stride_w - pad_w + kx;
                if (ix < 0 || ix >= iw) continue;
                gxc[iy * iw + ix] += g * kc[ky * kw + kx];
                gkc[ky * kw + kx] += g * xc[iy * iw + ix];
              }
            }
          }
        }
      }
    }
  };
  std::vector<NodePtr> inputs{xn, kn};
  if (bn) inputs.push_back(bn);
  return make_op(std::move(inputs), out, forward, backward);
}

Tensor conv2d(const Tensor& x, const Tensor& k, int stride_h, int stride_w, int pad_h, int pad_w) {
  return conv2d(x, k, Tensor(), stride_h, stride_w, pad_h, pad_w);
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride_h,
                        int stride_w, int pad_h, int pad_w) {
  if (x.rank() != 3) throw DimensionError("depthwise_conv2d: input must be [c,h,w]");
  if (k.rank() != 3) throw DimensionError("depthwise_conv2d: kernel must be [c,kh,kw]");
  if (x.dim(0) != k.dim(0)) {
    throw DimensionError("depthwise_conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(k.shape()));
  }
  if (stride_h < 1 || stride_w < 1) throw ParameterError("depthwise_conv2d: stride must be >= 1");
  std::int64_t c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  std::int64_t kh = k.dim(1), kw = k.dim(2);
  bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != c)) {
    throw DimensionError("depthwise_conv2d: bias must be [c]");
  }
  std::int64_t oh = conv_out_dim(ih, kh, stride_h, pad_h, "depthwise_conv2d");
  std::int64_t ow = conv_out_dim(iw, kw, stride_w, pad_w, "depthwise_conv2d");
  auto xn = x.node(), kn = k.node();
  NodePtr bn = has_bias ? b.node() : nullptr;
  auto out = make_node({c, oh, ow}, false);
  auto forward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* xc = xn->data.data() + ch * ih * iw;
      const double* kc = kn->data.data() + ch * kh * kw;
      double* oc_ = out->data.data() + ch * oh * ow;
      double bias = bn ? bn->data[ch] : 0.0;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double acc = bias;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            std::int64_t iy = oy * stride_h - pad_h + ky;
            if (iy < 0 || iy >= ih) continue;
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              std::int64_t ix = ox * stride_w - pad_w + kx;
              if (ix < 0 || ix >= iw) continue;
              acc += xc[iy * iw + ix] * kc[ky * kw + kx];
            }
          }
          oc_[oy * ow + ox] = acc;
        }
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* xc = xn->data.data() + ch * ih * iw;
      double* gxc = xn->grad.data() + ch * ih * iw;
      const double* kc = kn->data.data() + ch * kh * kw;
      double* gkc = kn->grad.data() + ch * kh * kw;
      const double* gc = out->grad.data() + ch * oh * ow;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          double g = gc[oy * ow + ox];
          if (bn) bn->grad[ch] += g;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            std::int64_t iy = oy * stride_h - pad_h + ky;
            if (iy < 0 || iy >= ih) continue;
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              std::int64_t ix = ox * stride_w - pad_w + kx;
              if (ix < 0 || ix >= iw) continue;
              gxc[iy * iw + ix] += g * kc[ky * kw + kx];
              gkc[ky * kw + kx] += g * xc[iy * iw + ix];
            }
          }
        }
      }
    }
  };
  std::vector<NodePtr> inputs{xn, kn};
  if (bn) inputs.push_back(bn);
  return make_op(std::move(inputs), out, forward, backward);
}

Tensor depthwise_separable_conv2d(const Tensor& x, const Tensor& depth_k, const Tensor& point_k,
                                  const Tensor& b, int stride_h, int stride_w, int pad_h,
                                  int pad_w) {
  Tensor mid = depthwise_conv2d(x, depth_k, Tensor(), stride_h, stride_w, pad_h, pad_w);
  return conv2d(mid, point_k, b, 1, 1, 0, 0);
}

Tensor adaptive_avg_pool2d(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.rank() != 3) throw DimensionError("adaptive_avg_pool2d: input must be [c,h,w]");
  std::int64_t c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  if (out_h < 1 || out_w < 1) throw ParameterError("adaptive_avg_pool2d: output dims must be >= 1");
  if (out_h > ih || out_w > iw) {
    throw DimensionError("adaptive_avg_pool2d: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " exceeds input " + std::to_string(ih) + "x" +
                         std::to_string(iw));
  }
  auto xn = x.node();
  auto out = make_node({c, out_h, out_w}, false);
  // Partition boundaries floor(i*H/out_h) .. floor((i+1)*H/out_h).
  auto lo = [](std::int64_t i, std::int64_t in, std::int64_t on) { return (i * in) / on; };
  auto forward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* xc = xn->data.data() + ch * ih * iw;
      double* oc_ = out->data.data() + ch * out_h * out_w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        std::int64_t y0 = lo(oy, ih, out_h), y1 = lo(oy + 1, ih, out_h);
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          std::int64_t x0 = lo(ox, iw, out_w), x1 = lo(ox + 1, iw, out_w);
          double acc = 0.0;
          for (std::int64_t y = y0; y < y1; ++y)
            for (std::int64_t xx = x0; xx < x1; ++xx) acc += xc[y * iw + xx];
          oc_[oy * out_w + ox] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
        }
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double* gxc = xn->grad.data() + ch * ih * iw;
      const double* gc = out->grad.data() + ch * out_h * out_w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        std::int64_t y0 = lo(oy, ih, out_h), y1 = lo(oy + 1, ih, out_h);
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          std::int64_t x0 = lo(ox, iw, out_w), x1 = lo(ox + 1, iw, out_w);
          double g = gc[oy * out_w + ox] / static_cast<double>((y1 - y0) * (x1 - x0));
          for (std::int64_t y = y0; y < y1; ++y)
            for (std::int64_t xx = x0; xx < x1; ++xx) gxc[y * iw + xx] += g;
        }
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

Tensor avg_pool2x2(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("avg_pool2x2: input must be [c,h,w]");
  if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw DimensionError("avg_pool2x2: spatial dims must be even, got " + shape_str(x.shape()));
  }
  return adaptive_avg_pool2d(x, x.dim(1) / 2, x.dim(2) / 2);
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("upsample_nearest2x: input must be [c,h,w]");
  std::int64_t c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  std::int64_t oh = ih * 2, ow = iw * 2;
  auto xn = x.node();
  auto out = make_node({c, oh, ow}, false);
  auto forward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* xc = xn->data.data() + ch * ih * iw;
      double* oc_ = out->data.data() + ch * oh * ow;
      for (std::int64_t y = 0; y < oh; ++y) {
        const double* xrow = xc + (y / 2) * iw;
        double* orow = oc_ + y * ow;
        for (std::int64_t xx = 0; xx < ow; ++xx) orow[xx] = xrow[xx / 2];
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double* gxc = xn->grad.data() + ch * ih * iw;
      const double* gc = out->grad.data() + ch * oh * ow;
      for (std::int64_t y = 0; y < oh; ++y) {
        const double* grow = gc + y * ow;
        double* gxrow = gxc + (y / 2) * iw;
        for (std::int64_t xx = 0; xx < ow; ++xx) gxrow[xx / 2] += grow[xx];
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

Tensor pool_pairs_rows(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("pool_pairs_rows: need rank-2, got " + shape_str(x.shape()));
  std::int64_t t = x.dim(0), d = x.dim(1);
  if (t == 0) throw DimensionError("pool_pairs_rows: zero rows");
  std::int64_t ot = (t + 1) / 2;
  auto xn = x.node();
  auto out = make_node({ot, d}, false);
  auto forward = [=]() {
    for (std::int64_t r = 0; r < ot; ++r) {
      std::int64_t a = 2 * r, b = std::min<std::int64_t>(2 * r + 1, t - 1);
      double cnt = (a == b) ? 1.0 : 2.0;
      const double* ra = xn->data.data() + a * d;
      const double* rb = xn->data.data() + b * d;
      double* o = out->data.data() + r * d;
      if (a == b) {
        std::copy_n(ra, d, o);
      } else {
        for (std::int64_t j = 0; j < d; ++j) o[j] = (ra[j] + rb[j]) / cnt;
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t r = 0; r < ot; ++r) {
      std::int64_t a = 2 * r, b = std::min<std::int64_t>(2 * r + 1, t - 1);
      const double* g = out->grad.data() + r * d;
      double* ga = xn->grad.data() + a * d;
      if (a == b) {
        for (std::int64_t j = 0; j < d; ++j) ga[j] += g[j];
      } else {
        double* gb = xn->grad.data() + b * d;
        for (std::int64_t j = 0; j < d; ++j) {
          ga[j] += 0.5 * g[j];
          gb[j] += 0.5 * g[j];
        }
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

// ---- normalization / softmax ----

Tensor normalize(const Tensor& x, NormMode mode, double eps) {
  if (eps <= 0.0) throw ParameterError("normalize: eps must be > 0");
  std::int64_t slices, slice_len;
  if (mode == NormMode::kInstance) {
    if (x.rank() != 3) throw DimensionError("normalize(instance): input must be [c,h,w]");
    slices = x.dim(0);
    slice_len = x.dim(1) * x.dim(2);
  } else {
    if (x.rank() < 1) throw DimensionError("normalize(layer): input must have rank >= 1");
    slice_len = x.dim(x.rank() - 1);
    slices = x.numel() / slice_len;
  }
  if (slice_len == 0) throw DimensionError("normalize: empty slice");
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  auto forward = [=]() {
    for (std::int64_t s = 0; s < slices; ++s) {
      const double* src = xn->data.data() + s * slice_len;
      double* dst = out->data.data() + s * slice_len;
      double mean = 0.0;
      for (std::int64_t i = 0; i < slice_len; ++i) mean += src[i];
      mean /= static_cast<double>(slice_len);
      double var = 0.0;
      for (std::int64_t i = 0; i < slice_len; ++i) {
        double d = src[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(slice_len);
      double inv = 1.0 / std::sqrt(var + eps);
      for (std::int64_t i = 0; i < slice_len; ++i) dst[i] = (src[i] - mean) * inv;
    }
  };
  auto backward = [=]() {
    for (std::int64_t s = 0; s < slices; ++s) {
      const double* src = xn->data.data() + s * slice_len;
      const double* y = out->data.data() + s * slice_len;
      const double* g = out->grad.data() + s * slice_len;
      double* gx = xn->grad.data() + s * slice_len;
      double mean = 0.0;
      for (std::int64_t i = 0; i < slice_len; ++i) mean += src[i];
      mean /= static_cast<double>(slice_len);
      double var = 0.0;
      for (std::int64_t i = 0; i < slice_len; ++i) {
        double d = src[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(slice_len);
      double inv = 1.0 / std::sqrt(var + eps);
      double gmean = 0.0, gy = 0.0;
      for (std::int64_t i = 0; i < slice_len; ++i) {
        gmean += g[i];
        gy += g[i] * y[i];
      }
      gmean /= static_cast<double>(slice_len);
      gy /= static_cast<double>(slice_len);
      for (std::int64_t i = 0; i < slice_len; ++i) {
        gx[i] += inv * (g[i] - gmean - y[i] * gy);
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

Tensor softmax_axis(const Tensor& x, int axis) {
  std::int64_t outer, len, inner;
  axis_split(x.shape(), axis, outer, len, inner);
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  auto forward = [=]() {
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        const double* base = xn->data.data() + o * len * inner + in;
        double* obase = out->data.data() + o * len * inner + in;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t i = 0; i < len; ++i) {
          double v = base[i * inner];
          if (std::isnan(v)) throw NumericError("softmax: NaN in input");
          if (v > mx) mx = v;
        }
        double sum = 0.0;
        for (std::int64_t i = 0; i < len; ++i) {
          double e = std::exp(base[i * inner] - mx);
          obase[i * inner] = e;
          sum += e;
        }
        for (std::int64_t i = 0; i < len; ++i) obase[i * inner] /= sum;
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        const double* y = out->data.data() + o * len * inner + in;
        const double* g = out->grad.data() + o * len * inner + in;
        double* gx = xn->grad.data() + o * len * inner + in;
        double dot = 0.0;
        for (std::int64_t i = 0; i < len; ++i) dot += g[i * inner] * y[i * inner];
        for (std::int64_t i = 0; i < len; ++i) {
          gx[i * inner] += y[i * inner] * (g[i * inner] - dot);
        }
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

Tensor log_softmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("log_softmax_rows: need rank-2, got " + shape_str(x.shape()));
  std::int64_t t = x.dim(0), v = x.dim(1);
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  auto forward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* src = xn->data.data() + r * v;
      double* dst = out->data.data() + r * v;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t i = 0; i < v; ++i) {
        if (std::isnan(src[i])) throw NumericError("log_softmax: NaN in input");
        if (src[i] > mx) mx = src[i];
      }
      double sum = 0.0;
      for (std::int64_t i = 0; i < v; ++i) sum += std::exp(src[i] - mx);
      double lse = mx + std::log(sum);
      for (std::int64_t i = 0; i < v; ++i) dst[i] = src[i] - lse;
    }
  };
  auto backward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* y = out->data.data() + r * v;
      const double* g = out->grad.data() + r * v;
      double* gx = xn->grad.data() + r * v;
      double gsum = 0.0;
      for (std::int64_t i = 0; i < v; ++i) gsum += g[i];
      for (std::int64_t i = 0; i < v; ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
    }
  };
  return make_op({xn}, out, forward, backward);
}

Tensor softmax_masked_rows(const Tensor& x, const std::vector<std::uint8_t>& allowed) {
  if (x.rank() != 2) throw DimensionError("softmax_masked_rows: need rank-2, got " + shape_str(x.shape()));
  std::int64_t t = x.dim(0), s = x.dim(1);
  if (static_cast<std::int64_t>(allowed.size()) != t * s) {
    throw DimensionError("softmax_masked_rows: mask size mismatch");
  }
  for (std::int64_t r = 0; r < t; ++r) {
    bool any = false;
    for (std::int64_t i = 0; i < s; ++i) {
      if (allowed[r * s + i]) {
        any = true;
        break;
      }
    }
    if (!any) throw ContractError("softmax_masked_rows: row " + std::to_string(r) + " fully masked");
  }
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  auto mask = allowed;  // owned copy baked into the closures
  auto forward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* src = xn->data.data() + r * s;
      double* dst = out->data.data() + r * s;
      const std::uint8_t* m = mask.data() + r * s;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t i = 0; i < s; ++i) {
        if (!m[i]) continue;
        if (std::isnan(src[i])) throw NumericError("softmax_masked_rows: NaN in input");
        if (src[i] > mx) mx = src[i];
      }
      double sum = 0.0;
      for (std::int64_t i = 0; i < s; ++i) {
        if (m[i]) {
          double e = std::exp(src[i] - mx);
          dst[i] = e;
          sum += e;
        } else {
          dst[i] = 0.0;
        }
      }
      for (std::int64_t i = 0; i < s; ++i) {
        if (m[i]) dst[i] /= sum;
      }
    }
  };
  auto backward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* y = out->data.data() + r * s;
      const double* g = out->grad.data() + r * s;
      double* gx = xn->grad.data() + r * s;
      const std::uint8_t* m = mask.data() + r * s;
      double dot = 0.0;
      for (std::int64_t i = 0; i < s; ++i) {
        if (m[i]) dot += g[i] * y[i];
      }
      for (std::int64_t i = 0; i < s; ++i) {
        if (m[i]) gx[i] += y[i] * (g[i] - dot);
      }
    }
  };
  return make_op({xn}, out, forward, backward);
}

// ---- indexing / selection ----

Tensor embedding_rows(const Tensor& table, const std::vector<std::int32_t>& ids) {
  if (table.rank() != 2) throw DimensionError("embedding_rows: table must be [v,d]");
  std::int64_t v = table.dim(0), d = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || id >= v) {
      throw ContractError("embedding_rows: id " + std::to_string(id) + " out of range [0," +
                          std::to_string(v) + ")");
    }
  }
  std::int64_t t = static_cast<std::int64_t>(ids.size());
  auto tn = table.node();
  auto out = make_node({t, d}, false);
  auto idv = ids;
  auto forward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      std::copy_n(tn->data.data() + static_cast<std::int64_t>(idv[r]) * d, d,
                  out->data.data() + r * d);
    }
  };
  auto backward = [=]() {
    for (std::int64_t r = 0; r < t; ++r) {
      const double* g = out->grad.data() + r * d;
      double* gt = tn->grad.data() + static_cast<std::int64_t>(idv[r]) * d;
      for (std::int64_t j = 0; j < d; ++j) gt[j] += g[j];
    }
  };
  return make_op({tn}, out, forward, backward);
}

Tensor nll_selected(const Tensor& logp, const std::vector<std::int32_t>& ids,
                    const std::vector<std::uint8_t>& mask, double norm) {
  if (logp.rank() != 2) throw DimensionError("nll_selected: logp must be [t,v]");
  std::int64_t t = logp.dim(0), v = logp.dim(1);
  if (static_cast<std::int64_t>(ids.size()) != t || static_cast<std::int64_t>(mask.size()) != t) {
    throw DimensionError("nll_selected: ids/mask length mismatch");
  }
  if (norm <= 0.0) throw ParameterError("nll_selected: norm must be > 0");
  for (std::int64_t r = 0; r < t; ++r) {
    if (mask[r] && (ids[r] < 0 || ids[r] >= v)) {
      throw ContractError("nll_selected: target id out of range at position " + std::to_string(r));
    }
  }
  auto ln = logp.node();
  auto out = make_node({1}, false);
  auto idv = ids;
  auto mv = mask;
  auto forward = [=]() {
    double acc = 0.0;
    for (std::int64_t r = 0; r < t; ++r) {
      if (mv[r]) acc -= ln->data[r * v + idv[r]];
    }
    out->data[0] = acc / norm;
  };
  auto backward = [=]() {
    double g = out->grad[0] / norm;
    for (std::int64_t r = 0; r < t; ++r) {
      if (mv[r]) ln->grad[r * v + idv[r]] -= g;
    }
  };
  return make_op({ln}, out, forward, backward);
}

// ---- regularization ----

Tensor dropout(const Tensor& x, double p, RngStream& rng, bool train) {
  if (p < 0.0 || p > 1.0) throw ParameterError("dropout: p must be in [0,1]");
  if (!train || p == 0.0) return x;
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  std::size_t n = xn->data.size();
  std::vector<double> scale(n);
  if (p >= 1.0) {
    std::fill(scale.begin(), scale.end(), 0.0);
  } else {
    double keep = 1.0 / (1.0 - p);
    for (auto& v : scale) v = rng.bernoulli(p) ? 0.0 : keep;
  }
  auto forward = [xn, out, n, scale]() {
    for (std::size_t i = 0; i < n; ++i) out->data[i] = xn->data[i] * scale[i];
  };
  auto backward = [xn, out, n, scale]() {
    for (std::size_t i = 0; i < n; ++i) xn->grad[i] += out->grad[i] * scale[i];
  };
  return make_op({xn}, out, forward, backward);
}

Tensor dropout_channels(const Tensor& x, double p, RngStream& rng, bool train) {
  if (p < 0.0 || p > 1.0) throw ParameterError("dropout_channels: p must be in [0,1]");
  if (x.rank() != 3) throw DimensionError("dropout_channels: input must be [c,h,w]");
  if (!train || p == 0.0) return x;
  std::int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto xn = x.node();
  auto out = make_node(x.shape(), false);
  std::vector<double> scale(static_cast<std::size_t>(c));
  if (p >= 1.0) {
    std::fill(scale.begin(), scale.end(), 0.0);
  } else {
    double keep = 1.0 / (1.0 - p);
    for (auto& v : scale) v = rng.bernoulli(p) ? 0.0 : keep;
  }
  auto forward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* src = xn->data.data() + ch * hw;
      double* dst = out->data.data() + ch * hw;
      for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * scale[ch];
    }
  };
  auto backward = [=]() {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* g = out->grad.data() + ch * hw;
      double* gx = xn->grad.data() + ch * hw;
      for (std::int64_t i = 0; i < hw; ++i) gx[i] += g[i] * scale[ch];
    }
  };
  return make_op({xn}, out, forward, backward);
}

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(what + ": non-finite value");
  }
}

}  // namespace scriptor
