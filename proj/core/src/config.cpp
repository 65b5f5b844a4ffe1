#include "scriptor/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "scriptor/errors.hpp"

namespace scriptor {

namespace {

using Setter = std::function<void(const nlohmann::json&)>;
using KeyMap = std::map<std::string, Setter>;

void apply_keys(const nlohmann::json& obj, const std::string& where, const KeyMap& keys) {
  if (!obj.is_object()) throw ParseError("config section " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    auto it = keys.find(key);
    if (it == keys.end()) throw ParseError("unknown config key: " + where + "." + key);
    try {
      it->second(value);
    } catch (const nlohmann::json::exception&) {
      throw ParseError("bad value for config key: " + where + "." + key);
    }
  }
}

Setter set_i64(std::int64_t& field) {
  return [&field](const nlohmann::json& v) { field = v.get<std::int64_t>(); };
}
Setter set_u64(std::uint64_t& field) {
  return [&field](const nlohmann::json& v) { field = v.get<std::uint64_t>(); };
}
Setter set_f64(double& field) {
  return [&field](const nlohmann::json& v) { field = v.get<double>(); };
}
Setter set_str(std::string& field) {
  return [&field](const nlohmann::json& v) { field = v.get<std::string>(); };
}
Setter set_bool(bool& field) {
  return [&field](const nlohmann::json& v) { field = v.get<bool>(); };
}

Setter set_factor(FactorParams& f, const std::string& where) {
  return [&f, where](const nlohmann::json& v) {
    apply_keys(v, where,
               {{"base", set_f64(f.base)},
                {"gamma", set_f64(f.gamma)},
                {"delta", set_f64(f.delta)},
                {"theta", set_f64(f.theta)}});
  };
}

nlohmann::json factor_json(const FactorParams& f) {
  return {{"base", f.base}, {"gamma", f.gamma}, {"delta", f.delta}, {"theta", f.theta}};
}

}  // namespace

RunConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("config root must be an object");
  RunConfig cfg;
  for (const auto& [section, body] : doc.items()) {
    if (section == "model") {
      ModelSettings& m = cfg.model;
      apply_keys(body, "model",
                 {{"d_model", set_i64(m.d_model)},
                  {"num_layers", set_i64(m.num_layers)},
                  {"num_heads", set_i64(m.num_heads)},
                  {"pffn_hidden", set_i64(m.pffn_hidden)},
                  {"k_mem", set_i64(m.k_mem)},
                  {"sparse_window", set_i64(m.sparse_window)},
                  {"sparse_anchor", set_i64(m.sparse_anchor)},
                  {"fusion_levels", set_i64(m.fusion_levels)},
                  {"encoder_width", set_i64(m.encoder_width)},
                  {"phi_hidden", set_i64(m.phi_hidden)},
                  {"dropout", set_f64(m.dropout)}});
    } else if (section == "msap") {
      MsapSettings& a = cfg.msap;
      apply_keys(body, "msap",
                 {{"alpha0", set_f64(a.warmup.alpha0)},
                  {"warmup_gamma", set_f64(a.warmup.gamma)},
                  {"warmup_epochs", set_i64(a.warmup.warmup_epochs)},
                  {"scaling_alpha", set_factor(a.scaling.alpha, "msap.scaling_alpha")},
                  {"scaling_beta", set_factor(a.scaling.beta, "msap.scaling_beta")},
                  {"scaling_omega", set_factor(a.scaling.omega, "msap.scaling_omega")},
                  {"layout_weight", set_factor(a.layout_weight, "msap.layout_weight")},
                  {"text_weight", set_factor(a.text_weight, "msap.text_weight")},
                  {"modulate_loss_weights", set_bool(a.modulate_loss_weights)}});
    } else if (section == "training") {
      TrainingSettings& t = cfg.training;
      apply_keys(body, "training",
                 {{"lr", set_f64(t.lr)},
                  {"batch_base", set_i64(t.batch_base)},
                  {"batch_gamma", set_f64(t.batch_gamma)},
                  {"batch_min", set_i64(t.batch_min)},
                  {"levels", set_i64(t.levels)},
                  {"epochs_per_level", set_i64(t.epochs_per_level)},
                  {"ctc_epochs", set_i64(t.ctc_epochs)},
                  {"teacher_force_rate", set_f64(t.teacher_force_rate)},
                  {"lambda_c", set_f64(t.lambda_c)},
                  {"lambda_reg", set_f64(t.lambda_reg)},
                  {"grad_penalty_pixels", set_i64(t.grad_penalty_pixels)},
                  {"alpha_l_start", set_f64(t.alpha_l_start)},
                  {"alpha_l_end", set_f64(t.alpha_l_end)},
                  {"complexity_probe_samples", set_i64(t.complexity_probe_samples)},
                  {"max_label_len", set_i64(t.max_label_len)},
                  {"seed", set_u64(t.seed)},
                  {"checkpoint_dir", set_str(t.checkpoint_dir)},
                  {"log_path", set_str(t.log_path)}});
    } else if (section == "synth") {
      SynthConfig& s = cfg.synth;
      apply_keys(body, "synth",
                 {{"alphabet", set_str(s.alphabet)},
                  {"line_height", set_i64(s.line_height)},
                  {"line_width", set_i64(s.line_width)},
                  {"min_chars", set_i64(s.min_chars)},
                  {"max_chars", set_i64(s.max_chars)},
                  {"slant_max", set_f64(s.slant_max)},
                  {"stroke_min", set_i64(s.stroke_min)},
                  {"stroke_max", set_i64(s.stroke_max)},
                  {"jitter_max", set_f64(s.jitter_max)},
                  {"spacing_min", set_i64(s.spacing_min)},
                  {"spacing_max", set_i64(s.spacing_max)},
                  {"lines_min", set_i64(s.lines_min)},
                  {"lines_max", set_i64(s.lines_max)},
                  {"page_width", set_i64(s.page_width)},
                  {"page_height", set_i64(s.page_height)}});
    } else if (section == "data") {
      DataSettings& d = cfg.data;
      apply_keys(body, "data",
                 {{"train_manifest", set_str(d.train_manifest)},
                  {"synth_per_level", set_i64(d.synth_per_level)},
                  {"val_samples", set_i64(d.val_samples)}});
    } else {
      throw ParseError("unknown config key: " + section);
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json doc;
  doc["model"] = {{"d_model", cfg.model.d_model},
                  {"num_layers", cfg.model.num_layers},
                  {"num_heads", cfg.model.num_heads},
                  {"pffn_hidden", cfg.model.pffn_hidden},
                  {"k_mem", cfg.model.k_mem},
                  {"sparse_window", cfg.model.sparse_window},
                  {"sparse_anchor", cfg.model.sparse_anchor},
                  {"fusion_levels", cfg.model.fusion_levels},
                  {"encoder_width", cfg.model.encoder_width},
                  {"phi_hidden", cfg.model.phi_hidden},
                  {"dropout", cfg.model.dropout}};
  doc["msap"] = {{"alpha0", cfg.msap.warmup.alpha0},
                 {"warmup_gamma", cfg.msap.warmup.gamma},
                 {"warmup_epochs", cfg.msap.warmup.warmup_epochs},
                 {"scaling_alpha", factor_json(cfg.msap.scaling.alpha)},
                 {"scaling_beta", factor_json(cfg.msap.scaling.beta)},
                 {"scaling_omega", factor_json(cfg.msap.scaling.omega)},
                 {"layout_weight", factor_json(cfg.msap.layout_weight)},
                 {"text_weight", factor_json(cfg.msap.text_weight)},
                 {"modulate_loss_weights", cfg.msap.modulate_loss_weights}};
  doc["training"] = {{"lr", cfg.training.lr},
                     {"batch_base", cfg.training.batch_base},
                     {"batch_gamma", cfg.training.batch_gamma},
                     {"batch_min", cfg.training.batch_min},
                     {"levels", cfg.training.levels},
                     {"epochs_per_level", cfg.training.epochs_per_level},
                     {"ctc_epochs", cfg.training.ctc_epochs},
                     {"teacher_force_rate", cfg.training.teacher_force_rate},
                     {"lambda_c", cfg.training.lambda_c},
                     {"lambda_reg", cfg.training.lambda_reg},
                     {"grad_penalty_pixels", cfg.training.grad_penalty_pixels},
                     {"alpha_l_start", cfg.training.alpha_l_start},
                     {"alpha_l_end", cfg.training.alpha_l_end},
                     {"complexity_probe_samples", cfg.training.complexity_probe_samples},
                     {"max_label_len", cfg.training.max_label_len},
                     {"seed", cfg.training.seed},
                     {"checkpoint_dir", cfg.training.checkpoint_dir},
                     {"log_path", cfg.training.log_path}};
  doc["synth"] = {{"alphabet", cfg.synth.alphabet},
                  {"line_height", cfg.synth.line_height},
                  {"line_width", cfg.synth.line_width},
                  {"min_chars", cfg.synth.min_chars},
                  {"max_chars", cfg.synth.max_chars},
                  {"slant_max", cfg.synth.slant_max},
                  {"stroke_min", cfg.synth.stroke_min},
                  {"stroke_max", cfg.synth.stroke_max},
                  {"jitter_max", cfg.synth.jitter_max},
                  {"spacing_min", cfg.synth.spacing_min},
                  {"spacing_max", cfg.synth.spacing_max},
                  {"lines_min", cfg.synth.lines_min},
                  {"lines_max", cfg.synth.lines_max},
                  {"page_width", cfg.synth.page_width},
                  {"page_height", cfg.synth.page_height}};
  doc["data"] = {{"train_manifest", cfg.data.train_manifest},
                 {"synth_per_level", cfg.data.synth_per_level},
                 {"val_samples", cfg.data.val_samples}};
  return doc;
}

}  // namespace scriptor
