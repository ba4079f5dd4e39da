#include "procap/error.hpp"
#include "procap/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using procap::fs::path;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed overriding the configuration");
  auto* out = cmd->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
}

procap::RunConfig resolve(const Common& c) {
  procap::RunConfig cfg = c.config.empty() ? procap::RunConfig{} : procap::load_run_config(c.config);
  if (c.seed) procap::apply_seed(cfg, *c.seed);
  return cfg;
}

std::optional<path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"procap: projection-aware dual captioning"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common synth_c;
  auto* synth = app.add_subcommand("synth", "Synthesize a composite-image dataset");
  add_common(synth, synth_c, true);

  Common kb_c;
  std::string kb_checkpoint, kb_manifest;
  auto* kb = app.add_subcommand("kb", "Knowledge-base operations");
  kb->require_subcommand(1);
  auto* kb_build = kb->add_subcommand("build", "Build a knowledge base from the manifest's sources");
  add_common(kb_build, kb_c, true);
  kb_build->add_option("--checkpoint", kb_checkpoint, "Model checkpoint")->required();
  kb_build->add_option("--manifest", kb_manifest, "Dataset manifest")->required();

  Common pre_c;
  std::string pre_data;
  auto* pretrain = app.add_subcommand("pretrain-decoder", "Pretrain the caption decoder on training captions");
  add_common(pretrain, pre_c, true);
  pretrain->add_option("--data", pre_data, "Dataset manifest")->required();

  Common train_c;
  std::string train_data, train_kb, train_init;
  auto* train = app.add_subcommand("train", "End-to-end training");
  add_common(train, train_c, true);
  train->add_option("--data", train_data, "Dataset manifest")->required();
  train->add_option("--kb", train_kb, "Knowledge base (kb.json)");
  train->add_option("--init", train_init, "Checkpoint to start from");

  Common cap_c;
  std::string cap_checkpoint, cap_kb, cap_image, cap_task;
  auto* caption = app.add_subcommand("caption", "Caption one composite image");
  add_common(caption, cap_c, false);
  caption->add_option("--checkpoint", cap_checkpoint, "Model checkpoint")->required();
  caption->add_option("--kb", cap_kb, "Knowledge base (kb.json)");
  caption->add_option("--image", cap_image, "Composite PNG")->required();
  caption->add_option("--task", cap_task, "scene or proj")->required()->check(CLI::IsMember({"scene", "proj"}));

  Common eval_c;
  std::string eval_checkpoint, eval_kb, eval_data, eval_split;
  bool eval_null = false;
  auto* eval = app.add_subcommand("eval", "Dual-caption evaluation");
  add_common(eval, eval_c, true);
  eval->add_option("--checkpoint", eval_checkpoint, "Model checkpoint")->required();
  eval->add_option("--kb", eval_kb, "Knowledge base (kb.json)");
  eval->add_option("--data", eval_data, "Dataset manifest")->required();
  eval->add_option("--split", eval_split, "Split to evaluate (default from config)");
  eval->add_flag("--null-context", eval_null, "Replace retrieved names with null names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      const auto data = procap::run_synth(resolve(synth_c), synth_c.out);
      std::cout << "wrote " << data.samples.size() << " samples to " << synth_c.out << "\n";
    } else if (kb_build->parsed()) {
      const auto k = procap::run_kb_build(resolve(kb_c), kb_checkpoint, kb_manifest, kb_c.out);
      std::cout << "wrote " << k.entries.size() << " entries to " << kb_c.out << "\n";
    } else if (pretrain->parsed()) {
      const auto r = procap::run_pretrain(resolve(pre_c), pre_data, pre_c.out);
      if (!r.epoch_loss.empty()) {
        std::cout << "lm loss " << r.epoch_loss.front() << " -> " << r.epoch_loss.back() << "\n";
      }
      std::cout << "wrote " << r.checkpoint.string() << "\n";
    } else if (train->parsed()) {
      const auto r = procap::run_train(resolve(train_c), train_data, opt_path(train_kb), opt_path(train_init),
                                       train_c.out);
      if (!r.log.empty()) std::cout << "final total loss " << r.log.back().loss.total << "\n";
      std::cout << "wrote " << r.checkpoint.string() << "\n";
    } else if (caption->parsed()) {
      std::cout << procap::run_caption(resolve(cap_c), cap_checkpoint, opt_path(cap_kb), cap_image,
                                       cap_task == "proj")
                << "\n";
    } else if (eval->parsed()) {
      auto cfg = resolve(eval_c);
      if (!eval_split.empty()) cfg.eval.split = eval_split;
      const auto r = procap::run_eval(cfg, eval_checkpoint, opt_path(eval_kb), eval_data, path(eval_c.out),
                                      eval_null);
      std::cout << procap::report_table(r.report);
    }
  } catch (const procap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
