// Command-line entry point: train, evaluate, ablate, report, synthdata.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ael/ablation.hpp"
#include "ael/config.hpp"
#include "ael/dataset.hpp"
#include "ael/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat key = value config file");
    app->add_option("--set", overrides, "override a config key (key=value), repeatable");
    app->add_option("--out", out, "output directory (sets key `out`)");
  }

  ael::RunConfig resolve() const {
    ael::RunConfig cfg;
    if (!config_file.empty()) cfg = ael::load_config_file(config_file, cfg);
    for (const auto& o : overrides) ael::apply_override(cfg, o);
    if (!out.empty()) cfg.out = out;
    cfg.validate();
    return cfg;
  }
};

const std::vector<ael::synth::Sample>& select_split(const ael::Dataset& data, const std::string& split,
                                                    std::vector<ael::synth::Sample>& scratch) {
  if (split == "val") return data.val;
  if (split == "train") return data.train;
  const auto& ids = split == "labeled"     ? data.partition.labeled
                    : split == "unlabeled" ? data.partition.unlabeled
                                           : throw ael::Error("unknown split: " + split);
  scratch.clear();
  for (int id : ids) scratch.push_back(data.train.at(id));
  return scratch;
}

int run_train(const ConfigArgs& args, const std::string& resume) {
  ael::RunConfig cfg;
  std::optional<ael::Trainer::Snapshot> snap;
  if (!resume.empty()) {
    snap = ael::checkpoint::read(resume);
    cfg = snap->config;
    if (!args.out.empty()) cfg.out = args.out;
    if (!args.overrides.empty() || !args.config_file.empty()) {
      throw ael::Error("--resume takes its configuration from the checkpoint; drop --config/--set");
    }
  } else {
    cfg = args.resolve();
  }
  const ael::Dataset data = ael::load_dataset(cfg);
  ael::Trainer trainer(cfg, data);
  if (snap) trainer.restore(*snap);
  std::cerr << "training " << cfg.max_iter << " steps from step " << trainer.state().step << " -> " << cfg.out
            << '\n';
  const ael::RunResult r = ael::train_run(trainer, data, cfg.out);
  std::cout << ael::to_table(r.eval);
  std::cout << "ledger tail share " << r.tail_share << '\n';
  return 0;
}

int run_evaluate(const std::string& ckpt, const std::string& split, const std::string& data_dir,
                 const std::string& json_out) {
  const auto snap = ael::checkpoint::read(ckpt);
  ael::RunConfig cfg = snap.config;
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  const ael::Dataset data = ael::load_dataset(cfg);
  std::vector<ael::synth::Sample> scratch;
  const auto& samples = select_split(data, split, scratch);
  if (snap.state.student.classes() != data.classes) {
    throw ael::Error("class count mismatch: checkpoint has " + std::to_string(snap.state.student.classes()) +
                     " classes, data has " + std::to_string(data.classes));
  }
  const auto report = ael::Trainer::evaluate_weights(snap.state.student, samples, data.classes, snap.tail_classes);
  const auto j = ael::to_json(report);
  if (!json_out.empty()) {
    std::ofstream(json_out) << j.dump(2) << '\n';
  }
  std::cout << ael::to_table(report);
  std::cout << j.dump() << '\n';
  return 0;
}

int run_ablate(const ConfigArgs& args, const std::string& grid_spec, int seeds) {
  const ael::RunConfig cfg = args.resolve();
  const ael::Dataset data = ael::load_dataset(cfg);
  const auto grid = ael::parse_grid(grid_spec);
  const auto rows = ael::ablate(cfg, data, grid, seeds, &std::cerr);
  fs::create_directories(cfg.out);
  std::ofstream(fs::path(cfg.out) / "config.resolved") << ael::resolved_text(cfg);
  std::ofstream csv(fs::path(cfg.out) / "ablation.csv");
  ael::write_ablation_csv(csv, rows);
  std::cout << ael::format_ablation(rows);
  return 0;
}

int run_report(const std::string& dir) {
  const fs::path root(dir);
  bool any = false;
  if (fs::exists(root / "metrics.json")) {
    std::ifstream in(root / "metrics.json");
    const auto j = nlohmann::json::parse(in);
    std::cout << ael::to_table(ael::iou_report_from_json(j.at("final_eval")));
    std::cout << "steps " << j.at("steps").get<int>() << ", ledger tail share "
              << j.at("ledger_tail_share").get<double>() << '\n';
    any = true;
  }
  if (fs::exists(root / "ablation.csv")) {
    std::ifstream in(root / "ablation.csv");
    std::string line;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) std::cout << std::setw(16) << cell;
      std::cout << '\n';
    }
    any = true;
  }
  if (!any) throw ael::Error("no metrics.json or ablation.csv in " + dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive equalization learning for semi-supervised segmentation"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  std::string resume;
  auto* train = app.add_subcommand("train", "train a student/teacher pair");
  train_args.attach(train);
  train->add_option("--resume", resume, "continue from a checkpoint");

  std::string ckpt, split = "val", eval_data, eval_json;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint's student model");
  evaluate->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  evaluate->add_option("--split", split, "val | train | labeled | unlabeled");
  evaluate->add_option("--data", eval_data, "dataset directory (overrides data.dir)");
  evaluate->add_option("--json", eval_json, "also write the report as JSON");

  ConfigArgs ablate_args;
  std::string grid = "stacked";
  int seeds = 3;
  auto* ablate = app.add_subcommand("ablate", "train a grid of component combinations");
  ablate_args.attach(ablate);
  ablate->add_option("--grid", grid, "rows like dr,aes,dr+aes or stacked (baseline always included)");
  ablate->add_option("--seeds", seeds, "seeds per row");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "print metrics.json / ablation.csv of a run directory");
  report->add_option("dir", report_dir, "run directory")->required();

  auto* keys = app.add_subcommand("keys", "list config keys with defaults");

  auto* synthdata = app.add_subcommand("synthdata", "synthetic benchmark");
  synthdata->require_subcommand(1);
  std::string gen_out;
  int gen_count = 320;
  int gen_val = 100;
  std::uint64_t gen_seed = 2021;
  ael::synth::SceneConfig scene;
  int image_size = scene.height;
  auto* generate = synthdata->add_subcommand("generate", "write scenes, manifest and partitions");
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--count", gen_count, "training scenes");
  generate->add_option("--val-count", gen_val, "validation scenes");
  generate->add_option("--seed", gen_seed, "generation seed");
  generate->add_option("--classes", scene.classes, "class count");
  generate->add_option("--image-size", image_size, "square image side");
  generate->add_option("--tail-exponent", scene.tail_exponent, "class weights (c+1)^-a");
  generate->add_option("--noise", scene.color_noise_sigma, "color noise sigma");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_args, resume);
    if (*evaluate) return run_evaluate(ckpt, split, eval_data, eval_json);
    if (*ablate) return run_ablate(ablate_args, grid, seeds);
    if (*report) return run_report(report_dir);
    if (*keys) {
      std::cout << ael::describe_keys();
      return 0;
    }
    if (*generate) {
      scene.height = scene.width = image_size;
      scene.validate();
      ael::write_dataset(gen_out, scene, gen_count, gen_val, gen_seed);
      std::cout << "wrote " << gen_count << " train + " << gen_val << " val scenes to " << gen_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
