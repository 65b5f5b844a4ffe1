#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scriptor/tensor.hpp"

namespace scriptor {

// Ordered name->tensor registry of trainable parameters.
class ParamMap {
 public:
  void add(const std::string& name, const Tensor& t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct Linear {
  Tensor w;  // [in,out]
  Tensor b;  // [out]

  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, RngStream& rng);
  Tensor forward(const Tensor& x) const;         // [t,in] -> [t,out]
  Tensor forward_vec(const Tensor& x) const;     // [in] -> [out]
  void collect(ParamMap& params, const std::string& prefix) const;
};

struct Conv2dLayer {
  Tensor w;  // [oc,ic,kh,kw]
  Tensor b;  // [oc]
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;

  Conv2dLayer() = default;
  Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, int kh, int kw, int sh, int sw, int ph,
              int pw, RngStream& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Depthwise k x k followed by pointwise 1x1.
struct DepthwiseSeparable {
  Tensor depth_k;  // [c,kh,kw]
  Tensor point_k;  // [oc,c,1,1]
  Tensor b;        // [oc]
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;

  DepthwiseSeparable() = default;
  DepthwiseSeparable(std::int64_t in_ch, std::int64_t out_ch, int k, int sh, int sw, RngStream& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Per-channel normalization over spatial extent, learnable affine.
struct InstanceNorm2d {
  Tensor gamma, beta;  // [c]
  double eps = 1e-5;

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(std::int64_t channels);
  Tensor forward(const Tensor& x) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Normalization over the last axis, learnable affine.
struct LayerNorm {
  Tensor gamma, beta;  // [d]
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::int64_t d);
  Tensor forward(const Tensor& x) const;  // [t,d] or [d]
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Global average pool -> bottleneck MLP -> sigmoid channel gates.
struct SqueezeExcite {
  Linear reduce, expand;

  SqueezeExcite() = default;
  SqueezeExcite(std::int64_t channels, std::int64_t reduction, RngStream& rng);
  Tensor gates(const Tensor& x) const;    // [c,h,w] -> [c]
  Tensor forward(const Tensor& x) const;  // gated map
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Randomly uses element dropout or channel dropout, an even coin per call.
struct MixDropout {
  double p_elem = 0.2;
  double p_channel = 0.2;

  Tensor forward(const Tensor& x, RngStream& rng, bool train) const;
  // Test hook: path 0 forces element dropout, path 1 forces channel dropout.
  Tensor forward_forced(const Tensor& x, RngStream& rng, bool train, int path) const;
};

struct Embedding {
  Tensor table;  // [v,d]

  Embedding() = default;
  Embedding(std::int64_t vocab, std::int64_t d, RngStream& rng);
  Tensor forward(const std::vector<std::int32_t>& ids) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

}  // namespace scriptor
