#include "scriptor/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace scriptor {

void DecoderConfig::validate() const {
  if (num_layers < 1) throw ParameterError("DecoderConfig: num_layers must be >= 1");
  if (num_heads < 1) throw ParameterError("DecoderConfig: num_heads must be >= 1");
  if (d_model % num_heads != 0) {
    throw ParameterError("DecoderConfig: d_model must be divisible by num_heads");
  }
  if (k_mem < 0) throw ParameterError("DecoderConfig: k_mem must be >= 0");
  if (pffn_hidden < 1) throw ParameterError("DecoderConfig: pffn_hidden must be >= 1");
  if (fusion_levels < 1) throw ParameterError("DecoderConfig: fusion_levels must be >= 1");
}

Tensor positional_encoding_1d(std::int64_t t_len, std::int64_t d_model) {
  if (d_model <= 0 || d_model % 2 != 0) {
    throw ParameterError("positional_encoding_1d: d_model must be a positive even number");
  }
  if (t_len < 0) throw ParameterError("positional_encoding_1d: negative length");
  Tensor pe = Tensor::zeros({t_len, d_model});
  double dm = static_cast<double>(d_model);
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (std::int64_t i = 0; 2 * i + 1 < d_model; ++i) {
      double div = std::pow(10000.0, 2.0 * static_cast<double>(i) / dm);
      pe.data()[t * d_model + 2 * i] = std::sin(static_cast<double>(t) / div);
      pe.data()[t * d_model + 2 * i + 1] = std::cos(static_cast<double>(t) / div);
    }
  }
  return pe;
}

std::vector<std::uint8_t> causal_mask(std::int64_t t_len) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(t_len * t_len), 0);
  for (std::int64_t i = 0; i < t_len; ++i)
    for (std::int64_t j = 0; j <= i; ++j) m[i * t_len + j] = 1;
  return m;
}

std::vector<std::uint8_t> full_mask(std::int64_t t_len, std::int64_t s_len) {
  return std::vector<std::uint8_t>(static_cast<std::size_t>(t_len * s_len), 1);
}

std::vector<std::uint8_t> sparse_attention_mask(std::int64_t t_len, std::int64_t s_len,
                                                std::int64_t window, std::int64_t anchor) {
  if (t_len < 1 || s_len < 1) throw ParameterError("sparse_attention_mask: empty axes");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(t_len * s_len), 0);
  for (std::int64_t t = 0; t < t_len; ++t) {
    bool any = false;
    std::int64_t center = t * s_len / t_len;
    for (std::int64_t s = 0; s < s_len; ++s) {
      bool in_band = window > 0 && std::llabs(s - center) <= window / 2;
      bool is_anchor = anchor > 0 && s % anchor == 0;
      if (in_band || is_anchor) {
        m[t * s_len + s] = 1;
        any = true;
      }
    }
    if (!any) throw ContractError("sparse_attention_mask: query row sees no positions");
  }
  return m;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<std::uint8_t>* allowed,
                            const Tensor* logit_scale) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("scaled_dot_attention: rank-2 inputs expected");
  }
  if (q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw DimensionError("scaled_dot_attention: mismatched q/k/v shapes");
  }
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor logits = mul_scalar(matmul(q, transpose2d(k)), inv_sqrt);
  if (logit_scale) logits = scale_by(logits, *logit_scale);
  Tensor probs = allowed ? softmax_masked_rows(logits, *allowed) : softmax_axis(logits, 1);
  return matmul(probs, v);
}

HeadProjection::HeadProjection(std::int64_t d_model, std::int64_t d_k, RngStream& rng) {
  double stddev = 1.0 / std::sqrt(static_cast<double>(d_model));
  wq = Tensor::randn({d_model, d_k}, rng, stddev, true);
  wk = Tensor::randn({d_model, d_k}, rng, stddev, true);
  wv = Tensor::randn({d_model, d_k}, rng, stddev, true);
}

void HeadProjection::collect(ParamMap& params, const std::string& prefix) const {
  params.add(prefix + ".wq", wq);
  params.add(prefix + ".wk", wk);
  params.add(prefix + ".wv", wv);
}

MultiHeadAttention::MultiHeadAttention(std::int64_t d_model, std::int64_t num_heads,
                                       RngStream& rng)
    : out_proj(d_model, d_model, rng) {
  if (num_heads < 1 || d_model % num_heads != 0) {
    throw ParameterError("MultiHeadAttention: d_model must be divisible by num_heads");
  }
  std::int64_t d_k = d_model / num_heads;
  heads.reserve(num_heads);
  for (std::int64_t i = 0; i < num_heads; ++i) heads.emplace_back(d_model, d_k, rng);
}

Tensor MultiHeadAttention::forward(const Tensor& q_rows, const Tensor& kv_rows,
                                   const std::vector<std::uint8_t>* allowed,
                                   const Tensor* logit_scale) const {
  std::vector<Tensor> outs;
  outs.reserve(heads.size());
  for (const auto& h : heads) {
    Tensor q = matmul(q_rows, h.wq);
    Tensor k = matmul(kv_rows, h.wk);
    Tensor v = matmul(kv_rows, h.wv);
    outs.push_back(scaled_dot_attention(q, k, v, allowed, logit_scale));
  }
  return out_proj.forward(concat(outs, 1));
}

void MultiHeadAttention::collect(ParamMap& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    heads[i].collect(params, prefix + ".h" + std::to_string(i));
  }
  out_proj.collect(params, prefix + ".out");
}

MixedMultiHeadAttention::MixedMultiHeadAttention(std::int64_t d_model, std::int64_t num_heads,
                                                 std::int64_t mem_rows, std::int64_t window,
                                                 std::int64_t anchor, RngStream& rng)
    : out_proj(d_model, d_model, rng),
      k_mem(mem_rows),
      sparse_window(window),
      sparse_anchor(anchor) {
  if (num_heads < 1 || d_model % num_heads != 0) {
    throw ParameterError("MixedMultiHeadAttention: d_model must be divisible by num_heads");
  }
  if (mem_rows < 0) throw ParameterError("MixedMultiHeadAttention: negative memory size");
  std::int64_t d_k = d_model / num_heads;
  heads.reserve(num_heads);
  for (std::int64_t i = 0; i < num_heads; ++i) heads.emplace_back(d_model, d_k, rng);
  if (k_mem > 0) {
    for (std::int64_t i = 0; i < num_heads / 2; ++i) {
      memory.push_back(Tensor::randn({k_mem, d_k}, rng, 0.02, true));
    }
  }
  lambda_mem = Tensor::scalar(0.5, true);
  lambda_sparse = Tensor::scalar(0.5, true);
}

Tensor MixedMultiHeadAttention::forward(const Tensor& q_rows, const Tensor& kv_rows) const {
  std::int64_t n_mem = memory_head_count();
  std::int64_t t_len = q_rows.dim(0), s_len = kv_rows.dim(0);
  std::vector<std::uint8_t> sparse;
  if (n_mem < static_cast<std::int64_t>(heads.size())) {
    sparse = sparse_attention_mask(t_len, s_len, sparse_window, sparse_anchor);
  }
  std::vector<Tensor> outs;
  outs.reserve(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto& h = heads[i];
    Tensor q = matmul(q_rows, h.wq);
    Tensor k = matmul(kv_rows, h.wk);
    Tensor v = matmul(kv_rows, h.wv);
    Tensor out;
    if (static_cast<std::int64_t>(i) < n_mem) {
      if (k_mem > 0) {
        const Tensor& m = memory[i];
        if (m.dim(1) != k.dim(1)) {
          throw DimensionError("MixedMultiHeadAttention: memory width mismatch");
        }
        k = concat({k, m}, 0);
        v = concat({v, m}, 0);
      }
      out = scale_by(scaled_dot_attention(q, k, v, nullptr), lambda_mem);
    } else {
      out = scale_by(scaled_dot_attention(q, k, v, &sparse), lambda_sparse);
    }
    outs.push_back(out);
  }
  return out_proj.forward(concat(outs, 1));
}

void MixedMultiHeadAttention::collect(ParamMap& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    heads[i].collect(params, prefix + ".h" + std::to_string(i));
  }
  for (std::size_t i = 0; i < memory.size(); ++i) {
    params.add(prefix + ".mem" + std::to_string(i), memory[i]);
  }
  params.add(prefix + ".lambda_mem", lambda_mem);
  params.add(prefix + ".lambda_sparse", lambda_sparse);
  out_proj.collect(params, prefix + ".out");
}

FusionCrossAttention::FusionCrossAttention(const DecoderConfig& cfg, RngStream& rng) {
  cfg.validate();
  levels.reserve(cfg.fusion_levels);
  for (std::int64_t l = 0; l < cfg.fusion_levels; ++l) {
    levels.emplace_back(cfg.d_model, cfg.num_heads, cfg.k_mem, cfg.sparse_window,
                        cfg.sparse_anchor, rng);
  }
  level_logits = Tensor::zeros({cfg.fusion_levels}, true);
}

Tensor FusionCrossAttention::forward(const Tensor& q_rows, const Tensor& kv_rows) const {
  if (levels.empty()) throw ContractError("FusionCrossAttention: no levels configured");
  Tensor weights = softmax_axis(level_logits, 0);
  Tensor kv = kv_rows;
  Tensor fused;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    Tensor term = scale_by(levels[l].forward(q_rows, kv),
                           narrow(weights, 0, static_cast<std::int64_t>(l), 1));
    fused = (l == 0) ? term : add(fused, term);
    if (l + 1 < levels.size()) kv = pool_pairs_rows(kv);
  }
  return fused;
}

void FusionCrossAttention::collect(ParamMap& params, const std::string& prefix) const {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    levels[l].collect(params, prefix + ".lvl" + std::to_string(l));
  }
  params.add(prefix + ".level_logits", level_logits);
}

DecoderLayer::DecoderLayer(const DecoderConfig& cfg, RngStream& rng)
    : self_attn(cfg.d_model, cfg.num_heads, rng),
      cross(cfg, rng),
      ff1(cfg.d_model, cfg.pffn_hidden, rng),
      ff2(cfg.pffn_hidden, cfg.d_model, rng),
      ln1(cfg.d_model),
      ln2(cfg.d_model),
      ln3(cfg.d_model) {}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& kv_rows) const {
  std::vector<std::uint8_t> causal = causal_mask(x.dim(0));
  Tensor a = ln1.forward(add(x, self_attn.forward(x, x, &causal)));
  Tensor b = ln2.forward(add(a, cross.forward(a, kv_rows)));
  Tensor pffn = ff2.forward(relu(ff1.forward(b)));
  return ln3.forward(add(b, pffn));
}

void DecoderLayer::collect(ParamMap& params, const std::string& prefix) const {
  self_attn.collect(params, prefix + ".self");
  cross.collect(params, prefix + ".cross");
  ff1.collect(params, prefix + ".ff1");
  ff2.collect(params, prefix + ".ff2");
  ln1.collect(params, prefix + ".ln1");
  ln2.collect(params, prefix + ".ln2");
  ln3.collect(params, prefix + ".ln3");
}

Decoder::Decoder(const DecoderConfig& config, std::int64_t vocab, RngStream& rng)
    : cfg(config), vocab_size(vocab) {
  cfg.validate();
  if (vocab < 1) throw ParameterError("Decoder: vocab size must be >= 1");
  embed = Embedding(vocab, cfg.d_model, rng);
  layers.reserve(cfg.num_layers);
  for (std::int64_t i = 0; i < cfg.num_layers; ++i) layers.emplace_back(cfg, rng);
  out_proj = Linear(cfg.d_model, vocab, rng);
}

Tensor Decoder::embed_with_pe1d(const std::vector<std::int32_t>& tokens) const {
  for (std::int32_t id : tokens) {
    if (id < 0 || id >= vocab_size) {
      throw ParameterError("Decoder: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  Tensor e = embed.forward(tokens);
  Tensor pe = positional_encoding_1d(static_cast<std::int64_t>(tokens.size()), cfg.d_model);
  return add(e, pe);
}

Tensor Decoder::hidden_states(const std::vector<std::int32_t>& tokens,
                              const Tensor& kv_rows) const {
  if (tokens.empty()) throw ContractError("Decoder: empty token sequence");
  Tensor x = embed_with_pe1d(tokens);
  for (const auto& layer : layers) x = layer.forward(x, kv_rows);
  return x;
}

Tensor Decoder::logits(const std::vector<std::int32_t>& tokens, const Tensor& kv_rows) const {
  return out_proj.forward(hidden_states(tokens, kv_rows));
}

GreedyResult Decoder::greedy_decode(const Tensor& kv_rows, std::int32_t sot_id,
                                    std::int32_t eot_id, std::int64_t max_len) const {
  if (max_len < 1) throw ParameterError("Decoder: max_len must be >= 1");
  GreedyResult res;
  std::vector<std::int32_t> seq = {sot_id};
  for (std::int64_t step = 0; step < max_len; ++step) {
    Tensor lg = logits(seq, kv_rows);
    std::int64_t t = lg.dim(0) - 1;
    const double* row = lg.data().data() + t * vocab_size;
    std::int32_t best = 0;
    for (std::int64_t v = 1; v < vocab_size; ++v) {
      if (row[v] > row[best]) best = static_cast<std::int32_t>(v);
    }
    if (best == eot_id) return res;
    res.tokens.push_back(best);
    seq.push_back(best);
  }
  res.truncated = true;
  return res;
}

void Decoder::collect(ParamMap& params, const std::string& prefix) const {
  embed.collect(params, prefix + ".embed");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(params, prefix + ".layer" + std::to_string(i));
  }
  out_proj.collect(params, prefix + ".out");
}

}  // namespace scriptor
