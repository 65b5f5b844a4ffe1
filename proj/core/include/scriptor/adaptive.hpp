#pragma once

#include <cstdint>
#include <utility>

#include "scriptor/decoder.hpp"
#include "scriptor/encoder.hpp"
#include "scriptor/nn.hpp"

namespace scriptor {

// Pooling grid of the complexity network per scale level: [4,16] for lines,
// [8,16] for paragraphs, [16,16r] for pages with r reading columns.
std::pair<std::int64_t, std::int64_t> complexity_pooling_dims(ScaleLevel level);

// Scores a feature map into (0,1): adaptive pool, flatten, two hidden stages
// with layer norm and dropout, terminal sigmoid. Maps smaller than the pooling
// grid are nearest-upsampled until they cover it.
struct ComplexityNetwork {
  ScaleLevel level = ScaleLevel::kSinglePage;
  std::int64_t channels = 0, hidden = 128;
  std::int64_t pool_h = 0, pool_w = 0;
  double dropout_p = 0.2;
  Linear w1, w2, w3;
  LayerNorm ln;

  ComplexityNetwork() = default;
  ComplexityNetwork(ScaleLevel level, std::int64_t channels, std::int64_t hidden,
                    double dropout_p, RngStream& rng);
  Tensor assess(const Tensor& fmap, RngStream& rng, bool train) const;  // scalar in (0,1)
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Per-channel sigmoid gate conditioned on [complexity score; pooled features].
struct FeatureGate {
  Linear gate;  // [1+channels] -> [channels]

  FeatureGate() = default;
  FeatureGate(std::int64_t channels, RngStream& rng);
  Tensor forward(const Tensor& fmap, const Tensor& c_score) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Positional-hint warmup: alpha(e) = alpha0 * (1 + gamma * min(1, e/warmup)).
struct WarmupSchedule {
  double alpha0 = 0.1, gamma = 0.5;
  std::int64_t warmup_epochs = 150;

  double alpha(std::int64_t epoch) const;
};

// f + alpha_e * PE2D over the map's own grid; channels must be PE-compatible.
Tensor blend_position_hint(const Tensor& fmap, double alpha_e);

// One factor of the complexity response curve:
// base * (1 + gamma*C) / (1 + exp(delta*(C - theta))).
struct FactorParams {
  double base = 1.0, gamma = 0.5, delta = 4.0, theta = 0.5;
};

struct ScalingParams {
  FactorParams alpha, beta, omega;
};

// Evaluates the curve on the complexity node so gradients reach C.
Tensor scaling_factor(const Tensor& c_score, const FactorParams& p);

struct ScalingFactors {
  Tensor alpha, beta, omega;
};

ScalingFactors compute_scaling_factors(const Tensor& c_score, const ScalingParams& p);

// Plain double-precision evaluation of the same curve, for schedule reporting.
double scaling_factor_value(double c, const FactorParams& p);

// Sinusoidal encoding of the relative index i/t_len:
// R[i,2k] = sin(2*pi*(k+1)*i/t_len), R[i,2k+1] = cos(same).
Tensor relative_position_rows(std::int64_t t_len, std::int64_t d);

struct SecondPassConfig {
  std::int64_t d_model = 128;
  std::int64_t num_heads = 4;
  std::int64_t k_mem = 32;
  std::int64_t sparse_window = 64, sparse_anchor = 16;
  ScalingParams scaling;
};

// Complexity-adaptive refinement of the first-pass sequence: adaptive queries
// from projected rows, document context, and relative positions; memory and
// sparse single-head attention; a combiner; then complexity-scaled multi-head
// attention over the sequence, scaled by the alpha factor.
struct SecondPass {
  SecondPassConfig cfg;
  Linear embed_proj;  // row-wise content projection
  Linear doc_proj;    // document context from the mean row
  Tensor memory;      // [k_mem, d_model], empty handle when k_mem = 0
  Linear combine;     // [2*d_model] -> [d_model]
  MultiHeadAttention scaled_attn;

  SecondPass() = default;
  SecondPass(const SecondPassConfig& config, RngStream& rng);
  Tensor forward(const Tensor& f1_rows, const Tensor& c_score) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

}  // namespace scriptor
