#include "scriptor/adaptive.hpp"

#include <cmath>

namespace scriptor {

std::pair<std::int64_t, std::int64_t> complexity_pooling_dims(ScaleLevel level) {
  switch (level) {
    case ScaleLevel::kLine: return {4, 16};
    case ScaleLevel::kParagraph: return {8, 16};
    case ScaleLevel::kSinglePage:
    case ScaleLevel::kDoublePage:
    case ScaleLevel::kTriplePage:
      return {16, 16 * scale_level_columns(level)};
  }
  throw ParameterError("complexity_pooling_dims: unknown scale level");
}

ComplexityNetwork::ComplexityNetwork(ScaleLevel lv, std::int64_t ch, std::int64_t hid,
                                     double p_drop, RngStream& rng)
    : level(lv), channels(ch), hidden(hid), dropout_p(p_drop) {
  if (ch < 1 || hid < 1) throw ParameterError("ComplexityNetwork: bad dimensions");
  auto [ph, pw] = complexity_pooling_dims(lv);
  pool_h = ph;
  pool_w = pw;
  w1 = Linear(ch * ph * pw, hid, rng);
  w2 = Linear(hid, hid, rng);
  w3 = Linear(hid, 1, rng);
  ln = LayerNorm(hid);
}

Tensor ComplexityNetwork::assess(const Tensor& fmap, RngStream& rng, bool train) const {
  if (fmap.rank() != 3 || fmap.dim(0) != channels) {
    throw DimensionError("ComplexityNetwork: expected [" + std::to_string(channels) +
                         ",h,w] map, got " + shape_str(fmap.shape()));
  }
  Tensor f = fmap;
  while (f.dim(1) < pool_h || f.dim(2) < pool_w) f = upsample_nearest2x(f);
  Tensor pooled = adaptive_avg_pool2d(f, pool_h, pool_w);
  Tensor flat = reshape(pooled, {channels * pool_h * pool_w});
  Tensor h1 = ln.forward(relu(w1.forward_vec(flat)));
  Tensor h2 = dropout(relu(w2.forward_vec(h1)), dropout_p, rng, train);
  return sigmoid(w3.forward_vec(h2));
}

void ComplexityNetwork::collect(ParamMap& params, const std::string& prefix) const {
  w1.collect(params, prefix + ".w1");
  w2.collect(params, prefix + ".w2");
  w3.collect(params, prefix + ".w3");
  ln.collect(params, prefix + ".ln");
}

FeatureGate::FeatureGate(std::int64_t channels, RngStream& rng)
    : gate(1 + channels, channels, rng) {}

Tensor FeatureGate::forward(const Tensor& fmap, const Tensor& c_score) const {
  if (fmap.rank() != 3) throw DimensionError("FeatureGate: feature map must be [c,h,w]");
  if (c_score.numel() != 1) throw DimensionError("FeatureGate: complexity score must be scalar");
  Tensor pooled = global_avg_pool2d(fmap);
  Tensor cond = concat({reshape(c_score, {1}), pooled}, 0);
  Tensor g = sigmoid(gate.forward_vec(cond));
  return scale_channels(fmap, g);
}

void FeatureGate::collect(ParamMap& params, const std::string& prefix) const {
  gate.collect(params, prefix + ".gate");
}

double WarmupSchedule::alpha(std::int64_t epoch) const {
  if (epoch < 0) throw ParameterError("WarmupSchedule: negative epoch");
  double progress = warmup_epochs <= 0
                        ? 1.0
                        : std::min(1.0, static_cast<double>(epoch) /
                                            static_cast<double>(warmup_epochs));
  return alpha0 * (1.0 + gamma * progress);
}

Tensor blend_position_hint(const Tensor& fmap, double alpha_e) {
  if (fmap.rank() != 3) throw DimensionError("blend_position_hint: map must be [c,h,w]");
  Tensor pe = positional_encoding_2d(fmap.dim(1), fmap.dim(2), fmap.dim(0));
  return add(fmap, mul_scalar(pe, alpha_e));
}

Tensor scaling_factor(const Tensor& c_score, const FactorParams& p) {
  if (c_score.numel() != 1) throw DimensionError("scaling_factor: scalar complexity expected");
  Tensor numer = mul_scalar(add_scalar(mul_scalar(c_score, p.gamma), 1.0), p.base);
  Tensor denom = add_scalar(exp_t(mul_scalar(add_scalar(c_score, -p.theta), p.delta)), 1.0);
  return mul(numer, reciprocal(denom));
}

ScalingFactors compute_scaling_factors(const Tensor& c_score, const ScalingParams& p) {
  return {scaling_factor(c_score, p.alpha), scaling_factor(c_score, p.beta),
          scaling_factor(c_score, p.omega)};
}

double scaling_factor_value(double c, const FactorParams& p) {
  return p.base * (1.0 + p.gamma * c) / (1.0 + std::exp(p.delta * (c - p.theta)));
}

Tensor relative_position_rows(std::int64_t t_len, std::int64_t d) {
  if (t_len < 1) throw ParameterError("relative_position_rows: empty sequence");
  if (d <= 0 || d % 2 != 0) {
    throw ParameterError("relative_position_rows: d must be a positive even number");
  }
  Tensor r = Tensor::zeros({t_len, d});
  const double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  for (std::int64_t i = 0; i < t_len; ++i) {
    double rel = static_cast<double>(i) / static_cast<double>(t_len);
    for (std::int64_t k = 0; 2 * k + 1 < d; ++k) {
      double phase = two_pi * static_cast<double>(k + 1) * rel;
      r.data()[i * d + 2 * k] = std::sin(phase);
      r.data()[i * d + 2 * k + 1] = std::cos(phase);
    }
  }
  return r;
}

SecondPass::SecondPass(const SecondPassConfig& config, RngStream& rng) : cfg(config) {
  if (cfg.d_model < 2 || cfg.d_model % 2 != 0) {
    throw ParameterError("SecondPass: d_model must be a positive even number");
  }
  if (cfg.num_heads < 1 || cfg.d_model % cfg.num_heads != 0) {
    throw ParameterError("SecondPass: d_model must be divisible by num_heads");
  }
  if (cfg.k_mem < 0) throw ParameterError("SecondPass: negative memory size");
  embed_proj = Linear(cfg.d_model, cfg.d_model, rng);
  doc_proj = Linear(cfg.d_model, cfg.d_model, rng);
  if (cfg.k_mem > 0) memory = Tensor::randn({cfg.k_mem, cfg.d_model}, rng, 0.02, true);
  combine = Linear(2 * cfg.d_model, cfg.d_model, rng);
  scaled_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, rng);
}

Tensor SecondPass::forward(const Tensor& f1_rows, const Tensor& c_score) const {
  if (f1_rows.rank() != 2 || f1_rows.dim(1) != cfg.d_model) {
    throw DimensionError("SecondPass: rows must be [n," + std::to_string(cfg.d_model) + "]");
  }
  std::int64_t n = f1_rows.dim(0);
  ScalingFactors sf = compute_scaling_factors(c_score, cfg.scaling);

  Tensor p_doc = doc_proj.forward_vec(mean_rows(f1_rows));
  Tensor rel = relative_position_rows(n, cfg.d_model);
  Tensor q = add(add(embed_proj.forward(f1_rows), scale_by(broadcast_rows(p_doc, n), sf.alpha)),
                 scale_by(rel, sf.beta));

  Tensor kv = f1_rows;
  if (cfg.k_mem > 0) kv = concat({f1_rows, memory}, 0);
  Tensor a_mem = scaled_dot_attention(q, kv, kv, nullptr);

  auto mask = sparse_attention_mask(n, n, cfg.sparse_window, cfg.sparse_anchor);
  Tensor a_sparse = scaled_dot_attention(q, f1_rows, f1_rows, &mask);

  Tensor comb = combine.forward(concat({a_mem, a_sparse}, 1));
  Tensor f2 = scaled_attn.forward(comb, f1_rows, nullptr, &sf.omega);
  return scale_by(f2, sf.alpha);
}

void SecondPass::collect(ParamMap& params, const std::string& prefix) const {
  embed_proj.collect(params, prefix + ".embed");
  doc_proj.collect(params, prefix + ".doc");
  if (cfg.k_mem > 0) params.add(prefix + ".memory", memory);
  combine.collect(params, prefix + ".combine");
  scaled_attn.collect(params, prefix + ".attn");
}

}  // namespace scriptor
