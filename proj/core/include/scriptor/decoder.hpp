#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scriptor/nn.hpp"

namespace scriptor {

struct DecoderConfig {
  std::int64_t num_layers = 6;
  std::int64_t d_model = 128;
  std::int64_t num_heads = 4;
  std::int64_t k_mem = 32;          // learnable memory rows per memory head
  std::int64_t sparse_window = 64;  // banded window width, <=0 disables the band
  std::int64_t sparse_anchor = 16;  // periodic global anchors, <=0 disables them
  std::int64_t pffn_hidden = 256;
  std::int64_t fusion_levels = 2;  // full resolution plus pooled copies

  std::int64_t d_k() const { return d_model / num_heads; }
  void validate() const;
};

// Interleaved sin/cos rows; PE[t,2i]=sin(t/10000^(2i/d)), PE[t,2i+1]=cos(same).
Tensor positional_encoding_1d(std::int64_t t_len, std::int64_t d_model);

// Flat [t_len*s_len] allow masks for the masked-softmax attention ops.
std::vector<std::uint8_t> causal_mask(std::int64_t t_len);
std::vector<std::uint8_t> full_mask(std::int64_t t_len, std::int64_t s_len);
// Banded window of width `window` around center(t) = floor(t*s_len/t_len),
// plus every position divisible by `anchor` as a global anchor.
std::vector<std::uint8_t> sparse_attention_mask(std::int64_t t_len, std::int64_t s_len,
                                                std::int64_t window, std::int64_t anchor);

// softmax(q k^T / sqrt(d_k)) v, optionally restricted to an allow mask.
// A logit_scale scalar multiplies the logits before the softmax; scaling by
// exactly 1 reproduces the unscaled path bitwise.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<std::uint8_t>* allowed,
                            const Tensor* logit_scale = nullptr);

struct HeadProjection {
  Tensor wq, wk, wv;  // [d_model, d_k]

  HeadProjection() = default;
  HeadProjection(std::int64_t d_model, std::int64_t d_k, RngStream& rng);
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Plain multi-head attention with an optional shared allow mask.
struct MultiHeadAttention {
  std::vector<HeadProjection> heads;
  Linear out_proj;  // d_model -> d_model

  MultiHeadAttention() = default;
  MultiHeadAttention(std::int64_t d_model, std::int64_t num_heads, RngStream& rng);
  Tensor forward(const Tensor& q_rows, const Tensor& kv_rows,
                 const std::vector<std::uint8_t>* allowed,
                 const Tensor* logit_scale = nullptr) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Multi-head attention over encoder features where the first half of the heads
// extends keys/values with learnable memory rows and the second half applies a
// sparse mask; the two groups are scaled by learnable lambda factors before
// the output projection.
struct MixedMultiHeadAttention {
  std::vector<HeadProjection> heads;
  std::vector<Tensor> memory;  // [k_mem, d_k] per memory head, empty if k_mem=0
  Tensor lambda_mem, lambda_sparse;  // scalars, initialized to 0.5
  Linear out_proj;
  std::int64_t k_mem = 0;
  std::int64_t sparse_window = 0, sparse_anchor = 0;

  MixedMultiHeadAttention() = default;
  MixedMultiHeadAttention(std::int64_t d_model, std::int64_t num_heads, std::int64_t k_mem,
                          std::int64_t window, std::int64_t anchor, RngStream& rng);
  std::int64_t memory_head_count() const { return static_cast<std::int64_t>(heads.size()) / 2; }
  Tensor forward(const Tensor& q_rows, const Tensor& kv_rows) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Cross-attention fused over hierarchy levels of the encoder sequence: level 0
// is full resolution, each further level averages row pairs of the previous
// one. Per-level attention parameters; softmax-normalized level weights.
struct FusionCrossAttention {
  std::vector<MixedMultiHeadAttention> levels;
  Tensor level_logits;  // [levels], softmax-normalized before use

  FusionCrossAttention() = default;
  FusionCrossAttention(const DecoderConfig& cfg, RngStream& rng);
  Tensor forward(const Tensor& q_rows, const Tensor& kv_rows) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Pre-norm free, post-norm residual wiring: x = LN(x + Sublayer(x)) for the
// causal self-attention, the fused cross-attention, and the PFFN in turn.
struct DecoderLayer {
  MultiHeadAttention self_attn;
  FusionCrossAttention cross;
  Linear ff1, ff2;
  LayerNorm ln1, ln2, ln3;

  DecoderLayer() = default;
  DecoderLayer(const DecoderConfig& cfg, RngStream& rng);
  Tensor forward(const Tensor& x, const Tensor& kv_rows) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

struct GreedyResult {
  std::vector<std::int32_t> tokens;  // emitted ids, end token excluded
  bool truncated = false;            // hit max_len without the end token
};

struct Decoder {
  DecoderConfig cfg;
  Embedding embed;
  std::vector<DecoderLayer> layers;
  Linear out_proj;  // d_model -> vocab
  std::int64_t vocab_size = 0;

  Decoder() = default;
  Decoder(const DecoderConfig& config, std::int64_t vocab, RngStream& rng);
  // E(y) + PE1D(t); ids must be in [0, vocab).
  Tensor embed_with_pe1d(const std::vector<std::int32_t>& tokens) const;
  Tensor hidden_states(const std::vector<std::int32_t>& tokens, const Tensor& kv_rows) const;
  // [T, vocab] raw scores; soft-maxed by the caller as needed.
  Tensor logits(const std::vector<std::int32_t>& tokens, const Tensor& kv_rows) const;
  GreedyResult greedy_decode(const Tensor& kv_rows, std::int32_t sot_id, std::int32_t eot_id,
                             std::int64_t max_len) const;
  void collect(ParamMap& params, const std::string& prefix) const;
};

}  // namespace scriptor
