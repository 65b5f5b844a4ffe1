#include "scriptor/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "scriptor/errors.hpp"
#include "scriptor/image.hpp"
#include "scriptor/layout.hpp"

namespace scriptor {

void Adam::update(ParamMap& params) {
  ++step;
  // lr = 0 must be a bitwise no-op, and x -= 0 * g can still flip the sign bit
  // of a -0.0 parameter, so skip the arithmetic entirely.
  if (lr == 0.0) return;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (const auto& [name, handle] : params.items()) {
    Tensor t = handle;  // shared node, mutable through the copy
    if (!t.defined()) throw ParameterError("optimizer given undefined parameter " + name);
    std::vector<double>& data = t.data();
    std::vector<double>& grad = t.grad();
    if (grad.size() != data.size()) continue;  // never touched by a backward pass
    std::vector<double>& mm = m[name];
    std::vector<double>& vv = v[name];
    if (mm.size() != data.size()) mm.assign(data.size(), 0.0);
    if (vv.size() != data.size()) vv.assign(data.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      double g = grad[i];
      mm[i] = beta1 * mm[i] + (1.0 - beta1) * g;
      vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g;
      double mhat = mm[i] / bc1;
      double vhat = vv[i] / bc2;
      data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
}

std::vector<std::int32_t> teacher_force_corrupt(const std::vector<std::int32_t>& tokens,
                                                double rate, const Vocabulary& vocab,
                                                RngStream& rng) {
  if (rate < 0.0 || rate > 1.0) throw ParameterError("corruption rate must be in [0,1]");
  std::vector<std::int32_t> pool;
  for (std::int32_t id = 0; id < vocab.size(); ++id)
    if (!vocab.is_special(id) && !vocab.is_layout_tag(id)) pool.push_back(id);
  std::vector<std::int32_t> out = tokens;
  if (rate == 0.0 || pool.size() < 2) return out;
  for (std::int32_t& id : out) {
    if (vocab.is_special(id) || vocab.is_layout_tag(id)) continue;
    if (!rng.bernoulli(rate)) continue;
    // uniform over the pool minus the original token
    std::int64_t j = rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 2);
    if (pool[static_cast<std::size_t>(j)] == id) j = static_cast<std::int64_t>(pool.size()) - 1;
    id = pool[static_cast<std::size_t>(j)];
  }
  return out;
}

TransferReport transfer_weights(ParamMap& dst, const std::map<std::string, Tensor>& src) {
  TransferReport report;
  for (const auto& [name, handle] : dst.items()) {
    Tensor t = handle;
    auto it = src.find(name);
    if (it != src.end() && it->second.defined() && it->second.shape() == t.shape()) {
      t.data() = it->second.data();
      report.copied.push_back(name);
    } else {
      report.fresh.push_back(name);
    }
  }
  return report;
}

namespace {

std::map<std::string, Tensor> to_param_snapshot(const ParamMap& params) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, t] : params.items()) out[name] = t;
  return out;
}

}  // namespace

TrainSample make_train_sample(const SyntheticSample& s, const Vocabulary& vocab) {
  TrainSample out;
  out.image = image_to_tensor(pad_to_multiple(s.image, 32));
  out.target_ids = vocab.encode(s.label);
  out.label = s.label;
  out.level = s.level;
  return out;
}

std::vector<TrainSample> load_manifest_samples(const std::string& manifest_path,
                                               const Vocabulary& vocab) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  std::vector<TrainSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw ParseError("manifest line " + std::to_string(line_no) + " is not a JSON object");
    if (!rec.contains("image") || !rec.contains("label") || !rec.contains("level"))
      throw ParseError("manifest line " + std::to_string(line_no) +
                       " needs image, label and level");
    std::filesystem::path img = rec.at("image").get<std::string>();
    if (img.is_relative()) img = base / img;
    TrainSample s;
    s.image = load_image_tensor(img.string(), 32);
    s.label = rec.at("label").get<std::string>();
    s.target_ids = vocab.encode(s.label);
    s.level = scale_level_from_name(rec.at("level").get<std::string>());
    out.push_back(std::move(s));
  }
  return out;
}

Tensor input_gradient_penalty(const Model& model, const Tensor& image, std::int64_t n_pixels,
                              RngStream& rng, double step) {
  if (n_pixels < 1) throw ParameterError("need at least one sampled pixel");
  if (step <= 0.0) throw ParameterError("difference step must be positive");
  std::int64_t numel = static_cast<std::int64_t>(image.data().size());
  if (numel == 0) throw DimensionError("penalty needs a non-empty image");
  std::vector<std::int64_t> picks;
  if (n_pixels >= numel) {
    picks.resize(static_cast<std::size_t>(numel));
    for (std::int64_t i = 0; i < numel; ++i) picks[static_cast<std::size_t>(i)] = i;
  } else {
    std::unordered_set<std::int64_t> seen;
    while (static_cast<std::int64_t>(picks.size()) < n_pixels) {
      std::int64_t i = rng.uniform_int(0, numel - 1);
      if (seen.insert(i).second) picks.push_back(i);
    }
  }
  Tensor acc;
  for (std::int64_t idx : picks) {
    Tensor plus = Tensor::from(image.data(), image.shape());
    Tensor minus = Tensor::from(image.data(), image.shape());
    plus.data()[static_cast<std::size_t>(idx)] += step;
    minus.data()[static_cast<std::size_t>(idx)] -= step;
    Tensor cp = model.phi.assess(model.encoder.features_through_se(plus), rng, false);
    Tensor cm = model.phi.assess(model.encoder.features_through_se(minus), rng, false);
    Tensor term = mul_scalar(abs_t(sub(cp, cm)), 1.0 / (2.0 * step));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(picks.size()));
}

CompositeLossResult sample_loss(const Model& model, const TrainSample& sample,
                                const Vocabulary& vocab, std::int64_t epoch, double c_level,
                                double c_target, const TrainingSettings& ts,
                                const MsapSettings& ms, RngStream& rng, bool train) {
  Model::Encoded enc = model.encode(sample.image, epoch, rng, train);

  std::vector<std::int32_t> input{Vocabulary::sot_id};
  std::vector<std::int32_t> corrupted =
      teacher_force_corrupt(sample.target_ids, train ? ts.teacher_force_rate : 0.0, vocab, rng);
  input.insert(input.end(), corrupted.begin(), corrupted.end());

  std::vector<std::int32_t> targets = sample.target_ids;
  targets.push_back(Vocabulary::eot_id);
  std::vector<std::uint8_t> layout_mask(targets.size(), 0);
  for (std::size_t i = 0; i < targets.size(); ++i)
    layout_mask[i] = vocab.is_layout_tag(targets[i]) ? 1 : 0;

  Tensor logits = model.teacher_logits(enc, input);

  ComplexityLossInputs cx;
  cx.c_score = enc.c_score;
  cx.c_target = c_target;
  if (train && ts.grad_penalty_pixels > 0)
    cx.grad_penalty = input_gradient_penalty(model, sample.image, ts.grad_penalty_pixels, rng);

  CompositeLossParams params;
  params.layout_weight = ms.layout_weight;
  params.text_weight = ms.text_weight;
  params.lambda_c = ts.lambda_c;
  params.lambda_reg = ts.lambda_reg;
  params.modulate = ms.modulate_loss_weights;
  return composite_loss(logits, targets, layout_mask, c_level, cx, params);
}

double curriculum_weight(std::int64_t epoch, std::int64_t total_epochs, double start,
                         double end) {
  if (total_epochs < 1) throw ParameterError("curriculum needs at least one epoch");
  if (epoch < 0 || epoch >= total_epochs) throw ParameterError("epoch outside its level");
  if (total_epochs == 1) return end;
  return start + (end - start) * static_cast<double>(epoch) /
                     static_cast<double>(total_epochs - 1);
}

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void append_log_line(const std::string& path, const nlohmann::json& record) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to log " + path);
  out << record.dump() << "\n";
}

nlohmann::json checkpoint_meta(const RunConfig& cfg, const Vocabulary& vocab, ScaleLevel level,
                               std::int64_t epoch, const std::string& stage) {
  nlohmann::json meta;
  meta["config"] = config_to_json(cfg);
  meta["vocab"] = vocab.tokens;
  meta["level"] = scale_level_name(level);
  meta["epoch"] = epoch;
  meta["stage"] = stage;
  return meta;
}

// Mean complexity score over a probe subset, eval mode, off the tape.
double probe_complexity(const Model& model, const std::vector<TrainSample>& samples,
                        std::int64_t budget) {
  std::int64_t n = std::min<std::int64_t>(std::max<std::int64_t>(budget, 1),
                                          static_cast<std::int64_t>(samples.size()));
  RngStream idle(0);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    Tensor f = model.encoder.features_through_se(samples[static_cast<std::size_t>(i)].image);
    sum += model.phi.assess(f, idle, false).value();
  }
  return sum / static_cast<double>(n);
}

}  // namespace

PretrainResult ctc_pretrain(const RunConfig& cfg) {
  const TrainingSettings& ts = cfg.training;
  cfg.synth.validate();
  std::filesystem::create_directories(ts.checkpoint_dir);

  // class id = alphabet position + 1; 0 stays the blank
  std::unordered_map<char, std::int32_t> classes;
  for (std::size_t i = 0; i < cfg.synth.alphabet.size(); ++i)
    classes[cfg.synth.alphabet[i]] = static_cast<std::int32_t>(i) + 1;
  std::int64_t n_classes = static_cast<std::int64_t>(classes.size());

  RngStream rng_init(derive_seed(ts.seed, "pretrain_init"));
  EncoderConfig ec = EncoderConfig::for_level(ScaleLevel::kLine, cfg.model.encoder_width);
  ec.dropout_p = cfg.model.dropout;
  Encoder encoder(ec, rng_init);
  CtcHead head(ec.c_f, n_classes, rng_init);
  ParamMap params;
  encoder.collect(params, "encoder");
  head.collect(params, "ctc_head");

  std::vector<SyntheticSample> raw = generate_synthetic(
      cfg.synth, ScaleLevel::kLine, cfg.data.synth_per_level, derive_seed(ts.seed, "pretrain_data"));
  std::int64_t frames = cfg.synth.line_width / ec.width_divisor;
  struct Item {
    Tensor image;
    std::vector<std::int32_t> target;
  };
  std::vector<Item> items;
  for (const SyntheticSample& s : raw) {
    Item it;
    it.image = image_to_tensor(pad_to_multiple(s.image, 32));
    for (char c : s.label) it.target.push_back(classes.at(c));
    if (ctc_min_frames(it.target) > frames) continue;  // label cannot fit this stride
    items.push_back(std::move(it));
  }
  if (items.empty()) throw ContractError("no feasible pre-training samples");

  PretrainResult result;
  result.checkpoint_path = join_path(ts.checkpoint_dir, "pretrain.json");
  Adam opt;
  opt.lr = ts.lr;
  RngStream rng_train(derive_seed(ts.seed, "pretrain"));
  std::int64_t batch = adaptive_batch_size(ts.batch_base, ts.batch_gamma, 0, ts.batch_min);
  bool first_batch = true;
  std::string last_good;

  for (std::int64_t e = 0; e < ts.ctc_epochs; ++e) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_train.engine());
    double epoch_sum = 0.0;
    std::int64_t epoch_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch)) {
      std::size_t stop = std::min(order.size(), at + static_cast<std::size_t>(batch));
      try {
        Tape tape;
        TapeScope scope(tape);
        Tensor sum;
        for (std::size_t k = at; k < stop; ++k) {
          const Item& it = items[order[k]];
          Tensor fmap = encoder.encode(it.image, rng_train, true);
          Tensor nll = ctc_loss(head.log_probs(fmap), it.target);
          sum = sum.defined() ? add(sum, nll) : nll;
        }
        Tensor loss = mul_scalar(sum, 1.0 / static_cast<double>(stop - at));
        double lv = loss.value();
        if (!std::isfinite(lv)) throw NumericError("loss is not finite");
        if (first_batch) {
          result.initial_loss = lv;
          first_batch = false;
        }
        epoch_sum += lv;
        ++epoch_batches;
        tape.backward(loss);
        opt.update(params);
      } catch (const NumericError& err) {
        throw DivergenceError(std::string("pre-training diverged: ") + err.what(), last_good);
      }
    }
    result.final_loss = epoch_sum / static_cast<double>(epoch_batches);
    append_log_line(ts.log_path, nlohmann::json{{"stage", "ctc_pretrain"},
                                                {"epoch", e},
                                                {"loss", result.final_loss},
                                                {"batch_size", batch}});
    save_checkpoint(result.checkpoint_path, to_param_snapshot(params),
                    checkpoint_meta(cfg, Vocabulary::from_tokens({}), ScaleLevel::kLine, e,
                                    "ctc_pretrain"));
    last_good = result.checkpoint_path;
  }
  if (ts.ctc_epochs == 0)
    save_checkpoint(result.checkpoint_path, to_param_snapshot(params),
                    checkpoint_meta(cfg, Vocabulary::from_tokens({}), ScaleLevel::kLine, 0,
                                    "ctc_pretrain"));
  return result;
}

CurriculumResult curriculum_train(const RunConfig& cfg, const std::string& init_checkpoint) {
  const TrainingSettings& ts = cfg.training;
  if (ts.levels < 1 || ts.levels > 5) throw ParameterError("curriculum runs 1 to 5 levels");
  if (ts.epochs_per_level < 1) throw ParameterError("need at least one epoch per level");
  cfg.synth.validate();
  std::filesystem::create_directories(ts.checkpoint_dir);

  Vocabulary vocab = build_vocabulary(cfg.synth);
  RngStream rng_train(derive_seed(ts.seed, "train"));
  std::map<std::string, Tensor> carried;
  bool have_carried = false;
  if (!init_checkpoint.empty()) {
    carried = load_checkpoint(init_checkpoint).params;
    have_carried = true;
  }

  std::vector<TrainSample> manifest_samples;
  if (!cfg.data.train_manifest.empty())
    manifest_samples = load_manifest_samples(cfg.data.train_manifest, vocab);

  CurriculumResult result;
  std::string last_good;
  std::int64_t global_epoch = 0;

  for (std::int64_t l = 0; l < ts.levels; ++l) {
    ScaleLevel level = static_cast<ScaleLevel>(l);
    std::string level_tag = "level" + std::to_string(l + 1);
    RngStream rng_model(derive_seed(ts.seed, "model_" + level_tag));
    Model model(cfg.model, cfg.msap, level, vocab.size(), rng_model);
    ParamMap params = model.parameters();
    if (have_carried) result.transfers.push_back(transfer_weights(params, carried));

    std::vector<SyntheticSample> raw = generate_synthetic(
        cfg.synth, level, cfg.data.synth_per_level, derive_seed(ts.seed, "data_" + level_tag));
    std::vector<TrainSample> samples;
    for (const SyntheticSample& s : raw) samples.push_back(make_train_sample(s, vocab));
    for (const TrainSample& s : manifest_samples)
      if (s.level == level) samples.push_back(s);
    if (samples.empty()) throw ContractError("no training samples for " + level_tag);

    // post-transfer state on disk: the divergence fallback from the very
    // first step, and the witness that the hand-off was bitwise
    std::string init_path = join_path(ts.checkpoint_dir, level_tag + "_init.json");
    save_checkpoint(init_path, to_param_snapshot(params),
                    checkpoint_meta(cfg, vocab, level, global_epoch, "init"));
    last_good = init_path;

    std::int64_t batch = adaptive_batch_size(ts.batch_base, ts.batch_gamma, l, ts.batch_min);
    double c_target = static_cast<double>(l) / 4.0;
    Adam opt;
    opt.lr = ts.lr;
    std::string best_path = join_path(ts.checkpoint_dir, level_tag + "_best.json");
    std::string last_path = join_path(ts.checkpoint_dir, level_tag + "_last.json");
    double best_loss = std::numeric_limits<double>::infinity();

    for (std::int64_t e = 0; e < ts.epochs_per_level; ++e) {
      double c_level = probe_complexity(model, samples, ts.complexity_probe_samples);
      double alpha_l = curriculum_weight(e, ts.epochs_per_level, ts.alpha_l_start, ts.alpha_l_end);

      std::vector<std::size_t> order(samples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng_train.engine());

      double sum_total = 0.0, sum_layout = 0.0, sum_text = 0.0, sum_cx = 0.0;
      std::int64_t n_batches = 0;
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch)) {
        std::size_t stop = std::min(order.size(), at + static_cast<std::size_t>(batch));
        try {
          Tape tape;
          TapeScope scope(tape);
          Tensor sum;
          double batch_layout = 0.0, batch_text = 0.0, batch_cx = 0.0;
          for (std::size_t k = at; k < stop; ++k) {
            CompositeLossResult r = sample_loss(model, samples[order[k]], vocab, global_epoch,
                                                c_level, c_target, ts, cfg.msap, rng_train, true);
            sum = sum.defined() ? add(sum, r.total) : r.total;
            batch_layout += r.layout_ce.value();
            batch_text += r.text_ce.value();
            batch_cx += r.complexity.value();
          }
          double inv = 1.0 / static_cast<double>(stop - at);
          Tensor mean_loss = mul_scalar(sum, inv);
          Tensor weighted = mul_scalar(mean_loss, alpha_l);
          double lv = mean_loss.value();
          if (!std::isfinite(lv))
            throw NumericError("loss is not finite");
          sum_total += lv;
          sum_layout += batch_layout * inv;
          sum_text += batch_text * inv;
          sum_cx += batch_cx * inv;
          ++n_batches;
          tape.backward(weighted);
          opt.update(params);
        } catch (const NumericError& err) {
          // blown-up numerics anywhere in the step count as divergence
          throw DivergenceError("training diverged at " + level_tag + " epoch " +
                                    std::to_string(e) + ": " + err.what(),
                                last_good);
        }
      }

      double inv_b = 1.0 / static_cast<double>(n_batches);
      double epoch_loss = sum_total * inv_b;
      append_log_line(ts.log_path, nlohmann::json{{"level", l + 1},
                                                  {"epoch", e},
                                                  {"global_epoch", global_epoch},
                                                  {"loss", epoch_loss},
                                                  {"layout_ce", sum_layout * inv_b},
                                                  {"text_ce", sum_text * inv_b},
                                                  {"complexity", sum_cx * inv_b},
                                                  {"c_mean", c_level},
                                                  {"batch_size", batch},
                                                  {"alpha_l", alpha_l},
                                                  {"alpha_e", cfg.msap.warmup.alpha(global_epoch)}});
      save_checkpoint(last_path, to_param_snapshot(params),
                      checkpoint_meta(cfg, vocab, level, global_epoch, "curriculum"));
      last_good = last_path;
      if (epoch_loss < best_loss) {
        best_loss = epoch_loss;
        save_checkpoint(best_path, to_param_snapshot(params),
                        checkpoint_meta(cfg, vocab, level, global_epoch, "curriculum"));
      }
      ++global_epoch;
    }

    result.level_checkpoints.push_back(best_path);
    result.final_checkpoint = last_path;
    carried = to_param_snapshot(params);
    have_carried = true;
  }
  return result;
}

MetricReport evaluate_samples(const Model& model, const Vocabulary& vocab,
                              const std::vector<TrainSample>& samples, std::int64_t epoch,
                              std::int64_t max_len) {
  MetricReport report;
  if (samples.empty()) return report;
  RngStream idle(0);
  std::vector<std::string> preds, refs;
  std::vector<std::string> pred_pages, ref_pages;
  std::vector<DocumentGraph> pred_graphs, ref_graphs;
  std::vector<std::vector<Region>> pred_docs, ref_docs;

  for (const TrainSample& s : samples) {
    Model::Encoded enc = model.encode(s.image, epoch, idle, false);
    GreedyResult g = model.transcribe(enc, Vocabulary::sot_id, Vocabulary::eot_id, max_len);
    std::string text = vocab.decode(g.tokens);
    preds.push_back(text);
    refs.push_back(s.label);
    if (s.level >= ScaleLevel::kSinglePage) {
      pred_pages.push_back(text);
      ref_pages.push_back(s.label);
      DocumentGraph ref_g;
      try {
        ref_g = tokens_to_graph(s.label);
      } catch (const ParseError&) {
        continue;  // reference is not structured, skip the pair
      }
      DocumentGraph pred_g = tokens_to_graph_lenient(text).graph;
      ref_graphs.push_back(ref_g);
      pred_graphs.push_back(pred_g);
      pred_docs.push_back(graph_regions(pred_g));
      ref_docs.push_back(graph_regions(ref_g));
    }
  }

  report.samples = static_cast<std::int64_t>(samples.size());
  report.cer = error_rate_parts(preds, refs, TextLevel::character);
  report.wer = error_rate_parts(preds, refs, TextLevel::word);
  report.ser = error_rate_parts(preds, refs, TextLevel::sentence);
  report.per = error_rate_parts(preds, refs, TextLevel::paragraph);
  if (!pred_pages.empty()) report.sper[1] = sper_parts(pred_pages, ref_pages, 1);
  if (!ref_graphs.empty()) {
    report.loer_part = loer_parts(pred_graphs, ref_graphs);
    report.map_cer_score = map_cer(pred_docs, ref_docs);
    for (const std::vector<Region>& doc : ref_docs)
      for (const Region& r : doc)
        report.map_weight += static_cast<std::int64_t>(utf8_code_points(r.text).size());
  }
  return report;
}

RestoredModel restore_model(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!ck.meta.contains("config")) throw ParseError("checkpoint has no config echo");
  if (!ck.meta.contains("vocab") || !ck.meta.at("vocab").is_array())
    throw ParseError("checkpoint has no vocabulary");

  RestoredModel out;
  out.config = parse_config(ck.meta.at("config"));
  std::vector<std::string> tokens = ck.meta.at("vocab").get<std::vector<std::string>>();
  if (tokens.size() < 4) throw ParseError("checkpoint vocabulary is too small");
  out.vocab = Vocabulary::from_tokens({tokens.begin() + 4, tokens.end()});
  for (int i = 0; i < 4; ++i)
    if (out.vocab.tokens[static_cast<std::size_t>(i)] != tokens[static_cast<std::size_t>(i)])
      throw ParseError("checkpoint vocabulary misses the reserved specials");
  out.level = scale_level_from_name(ck.meta.value("level", "line"));
  out.epoch = ck.meta.value("epoch", std::int64_t{0});

  RngStream rng(derive_seed(out.config.training.seed, "restore"));
  out.model = Model(out.config.model, out.config.msap, out.level, out.vocab.size(), rng);
  ParamMap params = out.model.parameters();
  transfer_weights(params, ck.params);
  return out;
}

}  // namespace scriptor
