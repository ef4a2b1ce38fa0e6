#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "uavris/config.hpp"
#include "uavris/experiment.hpp"

using namespace uavris;
using namespace uavris::harness;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kIoError = 3, kFailure = 4 };

struct Common {
  std::string config_path;
  std::string output_dir;
  std::string seeds;
  std::vector<std::string> overrides;
  bool paper_scale = false;
  long steps = 0;
  long episodes = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "experiment INI file");
  sub->add_option("-o,--out", c.output_dir, "output directory");
  sub->add_option("--seeds", c.seeds, "seed list (1,2,3) or range (1..10)");
  sub->add_option("--steps", c.steps, "training steps per run");
  sub->add_option("--episodes", c.episodes, "evaluation episodes");
  sub->add_option("--set", c.overrides, "section.key=value override (repeatable)");
  sub->add_flag("--paper-scale", c.paper_scale, "200000 steps, 10 seeds, 2000 evaluation episodes");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.paper_scale) cfg.apply_paper_scale();
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (!c.seeds.empty()) apply_override(cfg, "run.seeds=" + c.seeds);
  if (c.steps > 0) cfg.train_steps = c.steps;
  if (c.episodes > 0) cfg.eval_episodes = c.episodes;
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV-mounted RIS downlink: robust DRL beamforming experiments"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train", "train agents for every scenario point and seed");
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints and baselines on paired contexts");
  auto* baseline = app.add_subcommand("baseline", "evaluate the non-learned baselines only");
  auto* latency = app.add_subcommand("latency", "per-decision inference and solve latency");
  auto* complexity = app.add_subcommand("complexity", "per-step cost formulas and parameter counts");
  auto* sweep = app.add_subcommand("sweep", "train + evaluate over the uncertainty grid, emit degradation");
  for (auto* s : {train, eval, baseline, latency, complexity, sweep}) add_common(s, common);
  int timing_reps = 400;
  complexity->add_option("--timing-reps", timing_reps, "environment steps per timing fit (0 skips)");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = resolve(common);
    if (*train) {
      run_training(cfg, std::cout);
    } else if (*eval) {
      run_evaluation(cfg, std::cout);
    } else if (*baseline) {
      run_evaluation(cfg, std::cout, EvalSelection::baselines_only);
    } else if (*latency) {
      std::cout << run_latency(cfg, std::cout).render();
    } else if (*complexity) {
      std::cout << report_complexity(cfg, timing_reps).render();
    } else if (*sweep) {
      if (cfg.kind == ScenarioKind::ideal) cfg.kind = ScenarioKind::sweep;
      run_sweep(cfg, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
