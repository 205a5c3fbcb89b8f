#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "roadsr/pipeline.hpp"

namespace {

using roadsr::ordered_json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string dataset;
  std::string checkpoint;
  std::string intent_checkpoint;
  bool json = false;
};

roadsr::RunConfig resolve_config(const Flags& f) {
  roadsr::RunConfig cfg = f.config.empty() ? roadsr::RunConfig{} : roadsr::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  cfg.validate();
  return cfg;
}

double num(const ordered_json& j, const char* key) { return j.at(key).get<double>(); }

void print_summary(const std::string& cmd, const ordered_json& j) {
  std::printf("%s: config %s\n", cmd.c_str(), j.value("config_hash", "").c_str());
  if (cmd == "gen" || cmd == "eval-labeler") {
    const ordered_json& l = cmd == "gen" ? j.at("labeler") : j;
    std::printf("labeler acceptance %zu/%zu (%.4f)\n", l.at("accepted").get<std::size_t>(),
                l.at("episodes").get<std::size_t>(), num(l, "acceptance_rate"));
    std::printf("labeling accuracy %.6f over %zu frames%s\n", num(l, "accuracy"),
                l.at("frames_evaluated").get<std::size_t>(), l.at("no_accepted_frames").get<bool>() ? " (no accepted frames)" : "");
    for (const auto& [reason, n] : l.at("reject_reasons").items()) {
      std::printf("  rejected %-24s %zu\n", reason.c_str(), n.get<std::size_t>());
    }
  } else if (cmd == "train-srp") {
    const auto& loss = j.at("epoch_loss");
    if (!loss.empty()) std::printf("final epoch loss %.6f\n", loss.back().get<double>());
  } else if (cmd == "eval-srp") {
    std::printf("topology accuracy %.4f\n", num(j, "topology_accuracy"));
    std::printf("current region micro precision %.4f  mAP %.4f\n", num(j.at("current_region"), "micro_avg_precision"),
                num(j.at("current_region"), "map"));
    std::printf("future region mAP %.4f  (majority baseline %.4f)\n", num(j.at("future_region"), "map"),
                num(j, "future_majority_baseline_map"));
  } else if (cmd == "eval-intent") {
    std::printf("macro precision: srp %.4f  ablation %.4f\n",
                num(j.at("all").at("srp"), "macro_avg_precision"),
                num(j.at("all").at("ablation"), "macro_avg_precision"));
  } else if (cmd == "risk") {
    std::printf("identification rate: fused %.4f  plain %.4f\n", num(j.at("fused"), "identification_rate"),
                num(j.at("plain"), "identification_rate"));
  } else if (cmd == "export-bev") {
    for (const auto& f : j.at("files")) std::printf("  %s\n", f.get<std::string>().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic region pipeline over synthetic road scenes"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "config file (flat key = value)");
    sub->add_option("--seed", f.seed, "override the config seed");
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_flag("--json", f.json, "print the report as JSON");
  };
  auto add_dataset = [&](CLI::App* sub) { sub->add_option("--dataset", f.dataset, "dataset.jsonl")->required(); };
  auto add_ckpt = [&](CLI::App* sub) { sub->add_option("--checkpoint", f.checkpoint, "SRP checkpoint")->required(); };

  auto* gen = app.add_subcommand("gen", "simulate episodes, label them and write the dataset");
  add_common(gen);
  auto* eval_lab = app.add_subcommand("eval-labeler", "score labeler output against ground truth");
  add_common(eval_lab);
  add_dataset(eval_lab);
  auto* train_srp = app.add_subcommand("train-srp", "train the region predictor");
  add_common(train_srp);
  add_dataset(train_srp);
  auto* eval_srp = app.add_subcommand("eval-srp", "evaluate the region predictor on the test split");
  add_common(eval_srp);
  add_dataset(eval_srp);
  add_ckpt(eval_srp);
  auto* train_int = app.add_subcommand("train-intent", "train intention heads on a frozen region predictor");
  add_common(train_int);
  add_dataset(train_int);
  add_ckpt(train_int);
  auto* eval_int = app.add_subcommand("eval-intent", "evaluate intention heads");
  add_common(eval_int);
  add_dataset(eval_int);
  add_ckpt(eval_int);
  eval_int->add_option("--intent-checkpoint", f.intent_checkpoint, "intent checkpoint")->required();
  auto* risk = app.add_subcommand("risk", "risk object identification on the constructed suite");
  add_common(risk);
  add_dataset(risk);
  add_ckpt(risk);
  auto* bev = app.add_subcommand("export-bev", "write seeded BEV maps per topology kind");
  add_common(bev);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  try {
    roadsr::CommandInputs in;
    in.out_dir = f.out;
    in.dataset = f.dataset;
    in.checkpoint = f.checkpoint;
    in.intent_checkpoint = f.intent_checkpoint;
    std::optional<roadsr::RunConfig> expected;
    if (!f.config.empty() || f.seed) {
      expected = resolve_config(f);
      in.expected = &*expected;
    }

    ordered_json report;
    if (cmd == "gen") {
      report = roadsr::cmd_gen(resolve_config(f), in);
    } else if (cmd == "eval-labeler") {
      report = roadsr::cmd_eval_labeler(in);
    } else if (cmd == "train-srp") {
      report = roadsr::cmd_train_srp(in);
    } else if (cmd == "eval-srp") {
      report = roadsr::cmd_eval_srp(in);
    } else if (cmd == "train-intent") {
      report = roadsr::cmd_train_intent(in);
    } else if (cmd == "eval-intent") {
      report = roadsr::cmd_eval_intent(in);
    } else if (cmd == "risk") {
      report = roadsr::cmd_risk(in);
    } else {
      report = roadsr::cmd_export_bev(resolve_config(f), in);
    }
    if (f.json) {
      std::cout << report.dump(2) << '\n';
    } else {
      print_summary(cmd, report);
    }
    return 0;
  } catch (const roadsr::IoError& e) {
    std::cerr << "roadsr " << cmd << ": I/O error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "roadsr " << cmd << ": I/O error: " << e.what() << '\n';
    return 2;
  } catch (const roadsr::UnaffordableActionError& e) {
    std::cerr << "roadsr " << cmd << ": unaffordable action: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "roadsr " << cmd << ": error: " << e.what() << '\n';
    return 1;
  }
}
