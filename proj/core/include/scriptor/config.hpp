#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "scriptor/adaptive.hpp"
#include "scriptor/synth.hpp"

namespace scriptor {

struct ModelSettings {
  std::int64_t d_model = 128;
  std::int64_t num_layers = 6;
  std::int64_t num_heads = 4;
  std::int64_t pffn_hidden = 256;
  std::int64_t k_mem = 32;
  std::int64_t sparse_window = 64;
  std::int64_t sparse_anchor = 16;
  std::int64_t fusion_levels = 2;
  std::int64_t encoder_width = 32;  // working channels of encoder blocks 1-4
  std::int64_t phi_hidden = 128;    // complexity network hidden width
  double dropout = 0.2;
};

struct MsapSettings {
  WarmupSchedule warmup;        // position-hint schedule alpha_e
  ScalingParams scaling;        // alpha/beta/omega response curves
  FactorParams layout_weight;   // loss weight curve, base = lambda_layout^0
  FactorParams text_weight;     // base = lambda_text^0
  bool modulate_loss_weights = true;
};

struct TrainingSettings {
  double lr = 1e-3;
  std::int64_t batch_base = 16;  // B0 of the adaptive batch rule
  double batch_gamma = 0.5;
  std::int64_t batch_min = 2;
  std::int64_t levels = 5;  // curriculum levels to run, 1..5
  std::int64_t epochs_per_level = 2;
  std::int64_t ctc_epochs = 0;  // encoder pre-training epochs before the curriculum
  double teacher_force_rate = 0.2;
  double lambda_c = 1.0;
  double lambda_reg = 0.01;
  std::int64_t grad_penalty_pixels = 64;  // sampled pixels for the input-gradient term, 0 off
  double alpha_l_start = 0.5;             // curriculum weight ramp within a level
  double alpha_l_end = 1.0;
  std::int64_t complexity_probe_samples = 32;  // per-epoch C_l assessment budget
  std::int64_t max_label_len = 256;            // greedy decode cap during eval
  std::uint64_t seed = 0;
  std::string checkpoint_dir = "checkpoints";
  std::string log_path = "train.log.jsonl";
};

struct DataSettings {
  std::string train_manifest;         // empty: purely synthetic training
  std::int64_t synth_per_level = 32;  // generated samples per curriculum level
  std::int64_t val_samples = 8;       // held-out synthetic samples per level
};

// One JSON document with sections model / msap / training / synth / data.
struct RunConfig {
  ModelSettings model;
  MsapSettings msap;
  TrainingSettings training;
  SynthConfig synth;
  DataSettings data;
};

// Unknown sections or keys raise ParseError naming the offending key; absent
// keys keep their defaults.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Full echo of every setting, suitable for checkpoint metadata.
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace scriptor
