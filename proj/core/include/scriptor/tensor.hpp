#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
  Tape* tape = nullptr;  // tape that recorded the op producing this node

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<TensorNode>;

// Value-semantic handle; copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<double> data, const Shape& shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(const Shape& shape, RngStream& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  std::int64_t dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  double value() const;  // scalar tensors only
  double at(std::initializer_list<std::int64_t> idx) const;

  NodePtr node() const { return node_; }
  Tape* tape() const { return node_->tape; }

 private:
  NodePtr node_;
};

// Ordered record of executed operations; one per training step. backward()
// marks the tape consumed, reset() makes it reusable.
class Tape {
 public:
  void record(std::vector<NodePtr> inputs, NodePtr output, std::function<void()> forward,
              std::function<void()> backward);
  void backward(const Tensor& loss);
  void replay();  // re-runs every forward closure in recording order
  void reset();
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Entry {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> forward;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

// RAII activation of a tape for the current thread. Ops record onto the
// active tape; with no active tape they run forward-only (inference mode).
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
// out = x * s with scalar tensor s (gradients flow to both)
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor reciprocal(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---- structure ----
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose2d(const Tensor& a);
Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor broadcast_rows(const Tensor& v, std::int64_t rows);  // [d] -> [rows,d]

// ---- reductions ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_rows(const Tensor& a);         // [t,d] -> [d]
Tensor global_avg_pool2d(const Tensor& a); // [c,h,w] -> [c]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);        // [m,k]x[k,n]
Tensor add_bias(const Tensor& x, const Tensor& b);      // [t,d]+[d]
Tensor scale_channels(const Tensor& x, const Tensor& s);  // [c,h,w]*[c]

// ---- convolution / pooling ----
Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride_h, int stride_w,
              int pad_h, int pad_w);
Tensor conv2d(const Tensor& x, const Tensor& k, int stride_h, int stride_w, int pad_h, int pad_w);
Tensor depthwise_conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride_h,
                        int stride_w, int pad_h, int pad_w);
// depthwise 3x3-style conv followed by a 1x1 pointwise mix
Tensor depthwise_separable_conv2d(const Tensor& x, const Tensor& depth_k, const Tensor& point_k,
                                  const Tensor& b, int stride_h, int stride_w, int pad_h,
                                  int pad_w);
Tensor adaptive_avg_pool2d(const Tensor& x, std::int64_t out_h, std::int64_t out_w);
Tensor avg_pool2x2(const Tensor& x);  // even dims required
Tensor upsample_nearest2x(const Tensor& x);
Tensor pool_pairs_rows(const Tensor& x);  // [t,d] -> [ceil(t/2),d], mean of row pairs

// ---- normalization / softmax ----
enum class NormMode { kInstance, kLayer };
// kInstance: x is [c,h,w], normalized per channel; kLayer: normalized over the
// last axis per leading index. Pure normalization, affine is the caller's.
Tensor normalize(const Tensor& x, NormMode mode, double eps);
Tensor softmax_axis(const Tensor& x, int axis);
Tensor log_softmax_rows(const Tensor& x);  // [t,v]
// Rows softmax over allowed entries only; disallowed outputs are exactly zero
// and disallowed logits never enter max/exp/sum (bitwise masking).
Tensor softmax_masked_rows(const Tensor& x, const std::vector<std::uint8_t>& allowed);

// ---- indexing / selection ----
Tensor embedding_rows(const Tensor& table, const std::vector<std::int32_t>& ids);
// L = -(sum over t with mask[t]!=0 of logp[t, ids[t]]) / norm
Tensor nll_selected(const Tensor& logp, const std::vector<std::int32_t>& ids,
                    const std::vector<std::uint8_t>& mask, double norm);

// ---- regularization ----
// Inverted dropout; mask is sampled once and baked into the op (replay-stable).
Tensor dropout(const Tensor& x, double p, RngStream& rng, bool train);
// Drops whole channels of [c,h,w] with probability p.
Tensor dropout_channels(const Tensor& x, double p, RngStream& rng, bool train);

void check_finite(const Tensor& t, const std::string& what);

}  // namespace scriptor
