#include "scriptor/nn.hpp"

#include <cmath>

namespace scriptor {

void ParamMap::add(const std::string& name, const Tensor& t) {
  if (find(name)) throw ContractError("ParamMap: duplicate parameter name " + name);
  items_.emplace_back(name, t);
}

Tensor* ParamMap::find(const std::string& name) {
  for (auto& [n, t] : items_) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor* ParamMap::find(const std::string& name) const {
  for (auto& [n, t] : items_) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

Tensor he_init(const Shape& shape, std::int64_t fan_in, RngStream& rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  return Tensor::randn(shape, rng, stddev, true);
}

}  // namespace

Linear::Linear(std::int64_t in, std::int64_t out, RngStream& rng)
    : w(he_init({in, out}, in, rng)), b(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x) const { return add_bias(matmul(x, w), b); }

Tensor Linear::forward_vec(const Tensor& x) const {
  Tensor row = reshape(x, {1, x.numel()});
  return reshape(forward(row), {w.dim(1)});
}

void Linear::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".w", w);
  params.add(prefix + ".b", b);
}

Conv2dLayer::Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, int kh, int kw, int sh, int sw,
                         int ph, int pw, RngStream& rng)
    : w(he_init({out_ch, in_ch, kh, kw}, in_ch * kh * kw, rng)),
      b(Tensor::zeros({out_ch}, true)),
      stride_h(sh),
      stride_w(sw),
      pad_h(ph),
      pad_w(pw) {}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return conv2d(x, w, b, stride_h, stride_w, pad_h, pad_w);
}

void Conv2dLayer::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".w", w);
  params.add(prefix + ".b", b);
}

DepthwiseSeparable::DepthwiseSeparable(std::int64_t in_ch, std::int64_t out_ch, int k, int sh,
                                       int sw, RngStream& rng)
    : depth_k(he_init({in_ch, k, k}, k * k, rng)),
      point_k(he_init({out_ch, in_ch, 1, 1}, in_ch, rng)),
      b(Tensor::zeros({out_ch}, true)),
      stride_h(sh),
      stride_w(sw),
      pad_h(k / 2),
      pad_w(k / 2) {}

Tensor DepthwiseSeparable::forward(const Tensor& x) const {
  return depthwise_separable_conv2d(x, depth_k, point_k, b, stride_h, stride_w, pad_h, pad_w);
}

void DepthwiseSeparable::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".depth", depth_k);
  params.add(prefix + ".point", point_k);
  params.add(prefix + ".b", b);
}

InstanceNorm2d::InstanceNorm2d(std::int64_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)) {}

Tensor InstanceNorm2d::forward(const Tensor& x) const {
  Tensor normed = normalize(x, NormMode::kInstance, eps);
  Tensor scaled = scale_channels(normed, gamma);
  // beta broadcast over spatial extent via channel arithmetic
  Tensor ones = Tensor::full(x.shape(), 1.0);
  return add(scaled, scale_channels(ones, beta));
}

void InstanceNorm2d::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".gamma", gamma);
  params.add(prefix + ".beta", beta);
}

LayerNorm::LayerNorm(std::int64_t d)
    : gamma(Tensor::full({d}, 1.0, true)), beta(Tensor::zeros({d}, true)) {}

Tensor LayerNorm::forward(const Tensor& x) const {
  Tensor normed = normalize(x, NormMode::kLayer, eps);
  if (x.rank() == 1) {
    return add(mul(normed, gamma), beta);
  }
  if (x.rank() != 2) throw DimensionError("LayerNorm: expect rank 1 or 2");
  std::int64_t t = x.dim(0);
  return add(mul(normed, broadcast_rows(gamma, t)), broadcast_rows(beta, t));
}

void LayerNorm::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".gamma", gamma);
  params.add(prefix + ".beta", beta);
}

SqueezeExcite::SqueezeExcite(std::int64_t channels, std::int64_t reduction, RngStream& rng) {
  if (reduction < 1 || channels % reduction != 0) {
    throw ParameterError("SqueezeExcite: reduction must divide channel count");
  }
  reduce = Linear(channels, channels / reduction, rng);
  expand = Linear(channels / reduction, channels, rng);
}

Tensor SqueezeExcite::gates(const Tensor& x) const {
  Tensor squeezed = global_avg_pool2d(x);
  Tensor hidden = relu(reduce.forward_vec(squeezed));
  return sigmoid(expand.forward_vec(hidden));
}

Tensor SqueezeExcite::forward(const Tensor& x) const { return scale_channels(x, gates(x)); }

void SqueezeExcite::collect(ParamMap& params, const std::string& prefix) const {
  reduce.collect(params, prefix + ".reduce");
  expand.collect(params, prefix + ".expand");
}

Tensor MixDropout::forward(const Tensor& x, RngStream& rng, bool train) const {
  if (!train) return x;
  int path = rng.bernoulli(0.5) ? 1 : 0;
  return forward_forced(x, rng, train, path);
}

Tensor MixDropout::forward_forced(const Tensor& x, RngStream& rng, bool train, int path) const {
  if (!train) return x;
  if (path == 0) return dropout(x, p_elem, rng, true);
  return dropout_channels(x, p_channel, rng, true);
}

Embedding::Embedding(std::int64_t vocab, std::int64_t d, RngStream& rng)
    : table(Tensor::randn({vocab, d}, rng, 0.02, true)) {}

Tensor Embedding::forward(const std::vector<std::int32_t>& ids) const {
  return embedding_rows(table, ids);
}

void Embedding::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".table", table);
}

}  // namespace scriptor
