#include "scriptor/model.hpp"

namespace scriptor {

Model::Model(const ModelSettings& model_settings, const MsapSettings& msap_settings,
             ScaleLevel scale, std::int64_t vocab, RngStream& rng)
    : level(scale), settings(model_settings), msap(msap_settings), vocab_size(vocab) {
  EncoderConfig enc_cfg = EncoderConfig::for_level(scale, settings.encoder_width);
  enc_cfg.dropout_p = settings.dropout;
  encoder = Encoder(enc_cfg, rng);
  phi = ComplexityNetwork(scale, enc_cfg.c_f, settings.phi_hidden, settings.dropout, rng);
  gate = FeatureGate(enc_cfg.c_f, rng);
  seq_proj = Linear(enc_cfg.c_f, settings.d_model, rng);

  SecondPassConfig sp;
  sp.d_model = settings.d_model;
  sp.num_heads = settings.num_heads;
  sp.k_mem = settings.k_mem;
  sp.sparse_window = settings.sparse_window;
  sp.sparse_anchor = settings.sparse_anchor;
  sp.scaling = msap.scaling;
  second_pass = SecondPass(sp, rng);

  DecoderConfig dec;
  dec.num_layers = settings.num_layers;
  dec.d_model = settings.d_model;
  dec.num_heads = settings.num_heads;
  dec.k_mem = settings.k_mem;
  dec.sparse_window = settings.sparse_window;
  dec.sparse_anchor = settings.sparse_anchor;
  dec.pffn_hidden = settings.pffn_hidden;
  dec.fusion_levels = settings.fusion_levels;
  dec.validate();
  decoder = Decoder(dec, vocab, rng);
}

Model::Encoded Model::encode(const Tensor& image, std::int64_t epoch, RngStream& rng,
                             bool train) const {
  Tensor f_se = encoder.features_through_se(image);
  Tensor c = phi.assess(f_se, rng, train);
  Tensor f1 = blend_position_hint(f_se, msap.warmup.alpha(epoch));
  Tensor gated = gate.forward(f1, c);
  Tensor f5 = encoder.gated_fcn.forward(gated, rng, train);

  std::int64_t d = f5.dim(0), h = f5.dim(1), w = f5.dim(2);
  Tensor rows = transpose2d(reshape(f5, {d, h * w}));  // [h*w, c_f], j = y*w + x
  Tensor projected = seq_proj.forward(rows);

  Encoded enc;
  enc.c_score = c;
  enc.memory = second_pass.forward(projected, c);
  return enc;
}

Tensor Model::teacher_logits(const Encoded& enc,
                             const std::vector<std::int32_t>& input_tokens) const {
  return decoder.logits(input_tokens, enc.memory);
}

GreedyResult Model::transcribe(const Encoded& enc, std::int32_t sot_id, std::int32_t eot_id,
                               std::int64_t max_len) const {
  return decoder.greedy_decode(enc.memory, sot_id, eot_id, max_len);
}

ParamMap Model::parameters() const {
  ParamMap params;
  encoder.collect(params, "encoder");
  phi.collect(params, "phi");
  gate.collect(params, "gate");
  seq_proj.collect(params, "seq_proj");
  second_pass.collect(params, "second_pass");
  decoder.collect(params, "decoder");
  return params;
}

CtcHead::CtcHead(std::int64_t channels, std::int64_t n_classes, RngStream& rng)
    : proj(channels, n_classes + 1, rng) {}

Tensor CtcHead::log_probs(const Tensor& fmap) const {
  if (fmap.rank() != 3) throw DimensionError("ctc head expects a [c,h,w] feature map");
  Tensor pooled = adaptive_avg_pool2d(fmap, 1, fmap.dim(2));  // [c,1,w]
  Tensor frames = transpose2d(reshape(pooled, {fmap.dim(0), fmap.dim(2)}));
  return log_softmax_rows(proj.forward(frames));
}

void CtcHead::collect(ParamMap& params, const std::string& prefix) const {
  proj.collect(params, prefix + ".proj");
}

Vocabulary build_vocabulary(const SynthConfig& synth) {
  std::vector<std::string> entries = {"<D>", "</D>", "<P>", "</P>", "<S>", "</S>",
                                      "<N>", "</N>", "<A>", "</A>", "<B>", "</B>",
                                      " ",   "\n"};
  for (char c : synth.alphabet) {
    std::string s(1, c);
    bool seen = false;
    for (const std::string& e : entries) seen = seen || e == s;
    if (!seen) entries.push_back(s);
  }
  return Vocabulary::from_tokens(entries);
}

Model make_model(const RunConfig& cfg, ScaleLevel level, std::int64_t vocab, RngStream& rng) {
  return Model(cfg.model, cfg.msap, level, vocab, rng);
}

}  // namespace scriptor
