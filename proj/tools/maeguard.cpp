#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "maeguard/harness/config.hpp"
#include "maeguard/harness/dataset.hpp"
#include "maeguard/harness/pipeline.hpp"
#include "maeguard/harness/synthetic.hpp"

namespace hn = maeguard::harness;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

// Flag values that were given on the command line, as a JSON patch.
struct Flags {
  std::string config;
  std::string run_dir;
  std::vector<std::string> sets;
  json patch = json::object();

  void add(CLI::App* app) {
    app->add_option("-c,--config", config, "experiment config file (JSON with comments)");
    app->add_option("--set", sets, "override as key.path=json, e.g. repair.iters=10")->take_all();
    bind<std::string>(app, "--output-dir", "/output_dir", "root for run directories");
    bind<std::uint64_t>(app, "--seed", "/seed", "global seed");
    bind<std::string>(app, "--data-format", "/data/format", "synthetic, idx or manifest");
    bind<std::string>(app, "--data-images", "/data/images", "IDX image file or manifest");
    bind<std::string>(app, "--data-labels", "/data/labels", "IDX label file");
    bind<std::size_t>(app, "--train-size", "/data/train", "training split size");
    bind<std::size_t>(app, "--calibration-size", "/data/calibration", "calibration split size");
    bind<std::size_t>(app, "--test-size", "/data/test", "test split size");
    bind<std::size_t>(app, "--clf-epochs", "/classifier_train/epochs", "classifier epochs");
    bind<std::size_t>(app, "--mae-epochs", "/mae_train/epochs", "MAE epochs");
    bind<std::size_t>(app, "--attack-examples", "/attack_examples", "test images attacked per spec");
    bind<std::size_t>(app, "--masks", "/detection/masks", "masks per image for loss scoring");
    bind<std::size_t>(app, "--window", "/detection/window", "batch detection window");
    bind<double>(app, "--p-threshold", "/detection/p_threshold", "KS p-value threshold");
    bind<double>(app, "--fpr-target", "/detection/fpr_target", "false positive rate target");
    bind<double>(app, "--repair-eps", "/repair/epsilon", "repair l-inf bound");
    bind<double>(app, "--repair-alpha", "/repair/alpha", "repair step size");
    bind<std::size_t>(app, "--repair-iters", "/repair/iters", "repair iterations");
    bind<std::string>(app, "--repair-init", "/repair/init", "zero or uniform");
    bind<bool>(app, "--gated-repair", "/gated_repair", "repair only flagged examples");
    bind<std::size_t>(app, "--daa-examples", "/sweeps/daa_examples", "images per DAA curve point");
  }

  template <typename T>
  void bind(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto* self = this;
    app->add_option_function<T>(flag, [self, pointer](const T& v) { self->patch[json::json_pointer(pointer)] = v; },
                                help);
  }

  hn::ExperimentConfig resolve() {
    json j = patch;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw hn::ConfigError("--set expects key.path=value, got '" + s + "'");
      std::string pointer = "/" + s.substr(0, eq);
      for (auto& c : pointer)
        if (c == '.') c = '/';
      json value;
      try {
        value = json::parse(s.substr(eq + 1));
      } catch (const json::parse_error&) {
        value = s.substr(eq + 1);
      }
      j[json::json_pointer(pointer)] = value;
    }
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw hn::ConfigError("cannot open config file " + config);
      try {
        j.merge_patch(json::parse(in, nullptr, true, true));
      } catch (const json::parse_error& e) {
        throw hn::ConfigError("config " + config + ": " + e.what());
      }
    }
    auto cfg = hn::config_from_json(j);
    hn::validate(cfg);
    return cfg;
  }
};

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

void print_table(const hn::ResultTable& t) {
  std::cout << "clean accuracy " << t.clean_accuracy << " (subset " << t.clean_accuracy_subset
            << ", repaired " << t.clean_accuracy_repaired << ")\n";
  std::cout << hn::results_csv(t);
}

hn::Pipeline open_pipeline(Flags& f) {
  auto cfg = f.resolve();
  auto run = f.run_dir.empty() ? hn::RunDir::create(cfg.output_dir) : hn::RunDir(f.run_dir);
  if (f.run_dir.empty()) log_line("run directory " + run.root().string());
  return hn::Pipeline(cfg, run, log_line);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial detection and repair with a masked autoencoder"};
  app.require_subcommand(1);
  Flags flags;

  struct StageCmd {
    const char* name;
    const char* help;
    void (hn::Pipeline::*fn)();
  };
  const StageCmd stages[] = {
      {"train-clf", "train the classifier", &hn::Pipeline::train_classifier},
      {"train-mae", "train the MAE and score the reference set", &hn::Pipeline::train_mae},
      {"attack", "generate adversarial sets", &hn::Pipeline::attack},
      {"detect", "score losses, KS detection and baselines", &hn::Pipeline::detect},
      {"repair", "repair adversarial and clean sets", &hn::Pipeline::repair},
      {"sweep-iters", "repair accuracy against iterations", &hn::Pipeline::sweep_iters},
      {"sweep-eps", "repair accuracy against epsilon", &hn::Pipeline::sweep_eps},
      {"daa-curve", "defense-aware attack over lambda", &hn::Pipeline::daa_curve},
  };
  std::vector<std::pair<CLI::App*, void (hn::Pipeline::*)()>> stage_cmds;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    flags.add(sub);
    sub->add_option("-r,--run-dir", flags.run_dir, "existing run directory (default: a new one)");
    stage_cmds.emplace_back(sub, s.fn);
  }
  auto* run_all = app.add_subcommand("run-all", "train, attack, detect, repair, sweep and report in a new run");
  flags.add(run_all);
  auto* report = app.add_subcommand("report", "rebuild tables and plots of a run");
  report->add_option("-r,--run-dir", flags.run_dir, "run directory")->required();
  auto* print = app.add_subcommand("print-config", "print the resolved config");
  flags.add(print);

  auto* make = app.add_subcommand("make-dataset", "write the synthetic glyph dataset");
  std::string out_dir, format = "idx";
  hn::GlyphConfig glyphs;
  make->add_option("-o,--out", out_dir, "output directory")->required();
  make->add_option("--count", glyphs.count, "number of images");
  make->add_option("--seed", glyphs.seed, "generator seed");
  make->add_option("--side", glyphs.side, "image side in pixels");
  make->add_option("--format", format, "idx or manifest")->check(CLI::IsMember({"idx", "manifest"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    for (auto& [sub, fn] : stage_cmds) {
      if (!sub->parsed()) continue;
      auto p = open_pipeline(flags);
      (p.*fn)();
      return 0;
    }
    if (run_all->parsed()) {
      const auto cfg = flags.resolve();
      hn::RunDir run(cfg.output_dir);
      print_table(hn::run_pipeline(cfg, log_line, &run));
      std::cout << "artifacts in " << run.root().string() << "\n";
      return 0;
    }
    if (report->parsed()) {
      print_table(hn::report(flags.run_dir, log_line));
      return 0;
    }
    if (print->parsed()) {
      std::cout << hn::dump_config(flags.resolve());
      return 0;
    }
    if (make->parsed()) {
      std::filesystem::create_directories(out_dir);
      const auto set = hn::make_glyphs(glyphs);
      const std::filesystem::path dir(out_dir);
      if (format == "idx") {
        hn::write_idx(set, dir / "images.idx", dir / "labels.idx");
      } else {
        hn::write_manifest(set, dir / "manifest.json");
      }
      std::cout << "wrote " << set.size() << " images to " << out_dir << "\n";
      return 0;
    }
  } catch (const hn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hn::StageError& e) {
    std::cerr << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
