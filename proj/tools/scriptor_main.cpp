#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scriptor/gradcheck.hpp"
#include "scriptor/image.hpp"
#include "scriptor/layout.hpp"
#include "scriptor/training.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_divergence = 3;

using scriptor::RunConfig;

RunConfig config_for(const std::string& path, std::uint64_t seed, bool seed_set) {
  RunConfig cfg = scriptor::load_config(path);
  if (seed_set) cfg.training.seed = seed;
  return cfg;
}

int cmd_synth(const std::string& out_dir, const std::string& level_name, std::int64_t count,
              std::uint64_t seed) {
  scriptor::ScaleLevel level = scriptor::scale_level_from_name(level_name);
  std::filesystem::create_directories(out_dir);
  scriptor::SynthConfig cfg;
  std::vector<scriptor::SyntheticSample> samples =
      scriptor::generate_synthetic(cfg, level, count, seed);
  std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw scriptor::IoError("cannot write manifest " + manifest_path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::string name = level_name + "_" + std::to_string(i) + ".png";
    scriptor::save_png(samples[i].image, (std::filesystem::path(out_dir) / name).string());
    nlohmann::json rec{{"image", name}, {"label", samples[i].label}, {"level", level_name}};
    manifest << rec.dump() << "\n";
  }
  std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n";
  return exit_ok;
}

int cmd_pretrain(const RunConfig& cfg) {
  scriptor::PretrainResult res = scriptor::ctc_pretrain(cfg);
  std::cout << "pretrain checkpoint: " << res.checkpoint_path << "\n"
            << "initial loss: " << res.initial_loss << "\n"
            << "final loss: " << res.final_loss << "\n";
  return exit_ok;
}

int cmd_train(const RunConfig& cfg, const std::string& init_checkpoint) {
  scriptor::CurriculumResult res = scriptor::curriculum_train(cfg, init_checkpoint);
  for (std::size_t i = 0; i < res.transfers.size(); ++i) {
    const scriptor::TransferReport& t = res.transfers[i];
    std::cout << "transfer " << (i + 1) << ": " << t.copied.size() << " copied, "
              << t.fresh.size() << " fresh\n";
    for (const std::string& name : t.copied) std::cout << "  copied " << name << "\n";
  }
  for (const std::string& path : res.level_checkpoints)
    std::cout << "level checkpoint: " << path << "\n";
  std::cout << "final checkpoint: " << res.final_checkpoint << "\n";
  return exit_ok;
}

int cmd_decode(const std::string& checkpoint, const std::string& image_path) {
  scriptor::RestoredModel rm = scriptor::restore_model(checkpoint);
  scriptor::Tensor image = scriptor::load_image_tensor(image_path, 32);
  scriptor::RngStream idle(0);
  scriptor::Model::Encoded enc = rm.model.encode(image, rm.epoch, idle, false);
  scriptor::GreedyResult g =
      rm.model.transcribe(enc, scriptor::Vocabulary::sot_id, scriptor::Vocabulary::eot_id,
                          rm.config.training.max_label_len);
  std::string text = rm.vocab.decode(g.tokens);
  std::cout << text << "\n";
  scriptor::LenientParse parsed = scriptor::tokens_to_graph_lenient(text);
  for (const scriptor::ParseRepair& r : parsed.repairs)
    std::cerr << "repair at " << r.position << ": " << r.message << "\n";
  std::cout << scriptor::graph_to_xml(parsed.graph);
  return exit_ok;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& out_path) {
  scriptor::RestoredModel rm = scriptor::restore_model(checkpoint);
  std::vector<scriptor::TrainSample> samples =
      scriptor::load_manifest_samples(data_path, rm.vocab);
  scriptor::MetricReport report = scriptor::evaluate_samples(
      rm.model, rm.vocab, samples, rm.epoch, rm.config.training.max_label_len);
  std::string json = report.to_json();
  if (json.find("null") != std::string::npos)
    std::cerr << "warning: some metrics are undefined for this corpus\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << json << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw scriptor::IoError("cannot write report " + out_path);
    out << json << "\n";
    std::cout << "report written to " << out_path << "\n";
  }
  return exit_ok;
}

int cmd_gradcheck() {
  scriptor::GradCheckReport rep = scriptor::run_gradient_suite();
  std::cout << rep.summary();
  return rep.all_pass ? exit_ok : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"handwritten text and layout recognition"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* synth = app.add_subcommand("synth", "generate synthetic labeled images");
  std::string synth_out, synth_level = "line";
  std::int64_t synth_count = 16;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--level", synth_level,
                    "line, paragraph, single_page, double_page or triple_page");
  synth->add_option("--count", synth_count, "number of samples");
  synth->add_option("--seed", synth_seed, "generator seed");

  auto* pretrain = app.add_subcommand("pretrain", "line-level encoder pre-training");
  std::string pre_config;
  pretrain->add_option("--config", pre_config, "run configuration JSON")->required();
  pretrain->add_option("--seed", seed, "override the configured seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* train = app.add_subcommand("train", "staged curriculum training");
  std::string train_config, train_init;
  train->add_option("--config", train_config, "run configuration JSON")->required();
  train->add_option("--init", train_init, "initial checkpoint to transfer from");
  train->add_option("--seed", seed, "override the configured seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* decode = app.add_subcommand("decode", "transcribe one image");
  std::string dec_checkpoint, dec_image;
  decode->add_option("--checkpoint", dec_checkpoint, "checkpoint manifest")->required();
  decode->add_option("--image", dec_image, "image file (png, pgm, ppm)")->required();

  auto* eval = app.add_subcommand("eval", "score a manifest against a checkpoint");
  std::string eval_checkpoint, eval_data, eval_out;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint manifest")->required();
  eval->add_option("--data", eval_data, "dataset manifest JSON-lines")->required();
  eval->add_option("--out", eval_out, "report path, - for standard output");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_level, synth_count, synth_seed);
    if (*pretrain) return cmd_pretrain(config_for(pre_config, seed, seed_set));
    if (*train)
      return cmd_train(config_for(train_config, seed, seed_set), train_init);
    if (*decode) return cmd_decode(dec_checkpoint, dec_image);
    if (*eval) return cmd_eval(eval_checkpoint, eval_data, eval_out);
    if (*gradcheck) return cmd_gradcheck();
  } catch (const scriptor::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    std::cerr << "last good checkpoint: "
              << (e.last_good.empty() ? "(none)" : e.last_good) << "\n";
    return exit_divergence;
  } catch (const scriptor::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const scriptor::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const scriptor::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_usage;
}
