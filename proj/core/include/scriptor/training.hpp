#pragma once

#include <map>
#include <string>
#include <vector>

#include "scriptor/checkpoint.hpp"
#include "scriptor/config.hpp"
#include "scriptor/losses.hpp"
#include "scriptor/metrics.hpp"
#include "scriptor/model.hpp"

namespace scriptor {

// Adaptive-moment optimizer with per-parameter state addressed by name.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t step = 0;
  std::map<std::string, std::vector<double>> m, v;

  // Applies one update from the accumulated gradients. lr = 0 leaves every
  // parameter bitwise unchanged.
  void update(ParamMap& params);
};

// Teacher-forcing corruption: each plain-text token is independently replaced
// with probability rate by a different uniformly drawn plain-text token.
// Specials and layout tags are never touched and never drawn as replacements.
std::vector<std::int32_t> teacher_force_corrupt(const std::vector<std::int32_t>& tokens,
                                                double rate, const Vocabulary& vocab,
                                                RngStream& rng);

struct TransferReport {
  std::vector<std::string> copied;  // same name and shape, copied bitwise
  std::vector<std::string> fresh;   // kept their fresh initialization
};

// Copies compatible source values into the destination parameters in place.
TransferReport transfer_weights(ParamMap& dst, const std::map<std::string, Tensor>& src);

// One training example: padded image tensor plus its token targets.
struct TrainSample {
  Tensor image;  // [3,h,w]
  std::vector<std::int32_t> target_ids;
  std::string label;
  ScaleLevel level = ScaleLevel::kLine;
};

TrainSample make_train_sample(const SyntheticSample& s, const Vocabulary& vocab);

// JSON-lines manifest, one {"image", "label", "level"} object per line. Image
// paths resolve relative to the manifest's directory.
std::vector<TrainSample> load_manifest_samples(const std::string& manifest_path,
                                               const Vocabulary& vocab);

// L1 norm of the complexity score's input gradient, estimated by central
// differences over n_pixels sampled pixels. Built on the tape, so the penalty
// contributes parameter gradients.
Tensor input_gradient_penalty(const Model& model, const Tensor& image,
                              std::int64_t n_pixels, RngStream& rng, double step = 1e-3);

// Composite loss for one teacher-forced sample. c_level is the epoch-level
// complexity estimate driving the loss-weight curves; c_target the level-
// proportional regression target.
CompositeLossResult sample_loss(const Model& model, const TrainSample& sample,
                                const Vocabulary& vocab, std::int64_t epoch, double c_level,
                                double c_target, const TrainingSettings& ts,
                                const MsapSettings& ms, RngStream& rng, bool train);

// Curriculum weight: linear ramp over a level's epochs, reaching the end value
// at the final epoch. A single-epoch level uses the end value.
double curriculum_weight(std::int64_t epoch, std::int64_t total_epochs, double start,
                         double end);

struct PretrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string checkpoint_path;
};

// Line-level encoder pre-training against frame-alignment loss with a
// temporary head; the saved checkpoint carries encoder and head parameters.
PretrainResult ctc_pretrain(const RunConfig& cfg);

struct CurriculumResult {
  std::vector<std::string> level_checkpoints;  // best per level, in order
  std::string final_checkpoint;
  std::vector<TransferReport> transfers;  // one per level change
};

// The staged training loop: per-level transfer, adaptive batches, synthetic
// data, per-epoch complexity assessment, curriculum-weighted composite loss,
// optimizer updates, per-level best checkpoints, JSON-lines logging.
// init_checkpoint may be empty, a pre-training result, or an earlier run.
CurriculumResult curriculum_train(const RunConfig& cfg, const std::string& init_checkpoint);

// Greedy-decodes every sample and accumulates the metric suite. Documents that
// parse as layout graphs also contribute structure metrics.
MetricReport evaluate_samples(const Model& model, const Vocabulary& vocab,
                              const std::vector<TrainSample>& samples, std::int64_t epoch,
                              std::int64_t max_len);

// Rebuilds a model from checkpoint metadata (config echo, vocabulary, level,
// epoch) and loads its weights.
struct RestoredModel {
  Model model;
  Vocabulary vocab;
  RunConfig config;
  std::int64_t epoch = 0;
  ScaleLevel level = ScaleLevel::kLine;
};

RestoredModel restore_model(const std::string& checkpoint_path);

}  // namespace scriptor
