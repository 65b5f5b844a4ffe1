#pragma once

#include "scriptor/adaptive.hpp"
#include "scriptor/config.hpp"
#include "scriptor/decoder.hpp"
#include "scriptor/encoder.hpp"
#include "scriptor/vocab.hpp"

namespace scriptor {

// The complete two-pass recognizer for one scale level: encoder blocks,
// complexity network, position-hint blend, feature gate, sequence projection,
// adaptive second pass, and the transformer decoder.
struct Model {
  ScaleLevel level = ScaleLevel::kLine;
  ModelSettings settings;
  MsapSettings msap;
  std::int64_t vocab_size = 0;

  Encoder encoder;
  ComplexityNetwork phi;
  FeatureGate gate;
  Linear seq_proj;  // encoder channels -> d_model, applied to flattened rows
  SecondPass second_pass;
  Decoder decoder;

  Model() = default;
  Model(const ModelSettings& model_settings, const MsapSettings& msap_settings,
        ScaleLevel scale, std::int64_t vocab, RngStream& rng);

  struct Encoded {
    Tensor memory;   // [S, d_model] rows the decoder cross-attends to
    Tensor c_score;  // scalar complexity in (0,1)
  };

  // First pass (blocks 1-4 + alpha_e position hint), complexity assessment on
  // the raw block-4 features, gating, block 5, flatten + projection, then the
  // complexity-adaptive second pass.
  Encoded encode(const Tensor& image, std::int64_t epoch, RngStream& rng, bool train) const;

  // [T, vocab] scores for teacher-forced input tokens.
  Tensor teacher_logits(const Encoded& enc, const std::vector<std::int32_t>& input_tokens) const;

  GreedyResult transcribe(const Encoded& enc, std::int32_t sot_id, std::int32_t eot_id,
                          std::int64_t max_len) const;

  ParamMap parameters() const;
};

// Temporary frame classifier for encoder pre-training: collapse the feature
// map's height, project each column to class scores, log-softmax rows.
// Discarded when the curriculum starts.
struct CtcHead {
  Linear proj;  // encoder channels -> n_classes + 1 (blank first)

  CtcHead() = default;
  CtcHead(std::int64_t channels, std::int64_t n_classes, RngStream& rng);
  Tensor log_probs(const Tensor& fmap) const;  // [w, n_classes+1]
  void collect(ParamMap& params, const std::string& prefix) const;
};

// Token inventory induced by a generator alphabet: the four specials, the
// twelve layout tags, space, newline, then every alphabet character.
Vocabulary build_vocabulary(const SynthConfig& synth);

Model make_model(const RunConfig& cfg, ScaleLevel level, std::int64_t vocab, RngStream& rng);

}  // namespace scriptor
