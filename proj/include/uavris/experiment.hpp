#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uavris/agent.hpp"
#include "uavris/config.hpp"
#include "uavris/environment.hpp"

namespace uavris::harness {

/// Environment for one operating point. The user pool, the BF-only RIS
/// phases and the optional state standardiser depend only on the
/// experiment seed, so every algorithm at a point sees the same contexts.
env::Environment make_environment(const ExperimentConfig& cfg, const ScenarioPoint& point,
                                  const std::string& algorithm);

drl::AgentConfig agent_config(const ExperimentConfig& cfg, const std::string& algorithm);

/// Decision rule of a non-learned baseline.
drl::Policy baseline_policy(const ExperimentConfig& cfg, const env::Environment& env, const std::string& algorithm);

std::string cell_name(const std::string& algorithm, const ScenarioPoint& point, std::uint64_t seed);
std::string checkpoint_path(const ExperimentConfig& cfg, const std::string& algorithm, const ScenarioPoint& point,
                            std::uint64_t seed);

struct TrainingRecord {
  std::string algorithm;
  ScenarioPoint point;
  std::uint64_t seed = 0;
  double final_smoothed = 0.0;
  long infeasible_actions = 0;
  double wall_seconds = 0.0;
};

/// Trains every (point, learned algorithm, seed) cell; cells whose training
/// signature and seed match an earlier cell copy its artifacts. Writes
///   checkpoints/<cell>.ckpt
///   curves/<cell>.csv          step,raw_reward,smoothed_reward
///   training_summary.csv       algorithm,point,sigma_j_deg,rho,seed,steps,final_smoothed_reward,infeasible_actions
///   training_timing.txt        wall-clock per cell (kept out of the CSVs)
std::vector<TrainingRecord> run_training(const ExperimentConfig& cfg, std::ostream& log);

struct EvalSummaryRow {
  std::string algorithm;
  ScenarioPoint point;
  int n_seeds = 0;  ///< 0 for baselines, which carry no interval
  double mean = 0.0;
  double ci95_half = 0.0;
};

enum class EvalSelection { all, baselines_only };

/// Paired-context evaluation of trained agents and/or baselines. With prefix
/// "eval" (or "baseline") writes
///   <prefix>_episodes.csv   algorithm,point,seed,episode,episode_seed,throughput
///   <prefix>_seeds.csv      algorithm,point,seed,mean_throughput
///   <prefix>_summary.csv    algorithm,point,axis,sigma_j_deg,rho,n_seeds,mean,ci95_half,ci95_low,ci95_high
/// Learned rows average each seed's evaluation mean; baseline rows have
/// seed "-" and empty interval columns.
std::vector<EvalSummaryRow> run_evaluation(const ExperimentConfig& cfg, std::ostream& log,
                                           EvalSelection selection = EvalSelection::all);

struct DegradationRow {
  std::string algorithm;
  std::string axis;
  std::string from_point, to_point;
  double mean_from = 0.0, mean_to = 0.0;
  double relative = 0.0;  ///< (mean_from - mean_to) / mean_from
};

/// Per axis, from the cleanest point (sigma_j = 0, rho = 1, else the first)
/// to the last point listed.
std::vector<DegradationRow> degradation(const std::vector<EvalSummaryRow>& rows);
void write_degradation_csv(const std::string& path, const std::vector<DegradationRow>& rows);

/// Training, evaluation and degradation.csv over the sweep grid.
std::vector<DegradationRow> run_sweep(const ExperimentConfig& cfg, std::ostream& log);

struct LatencyEntry {
  std::string algorithm;
  double median_ms = 0.0;
  int decisions = 0;
};

struct LatencyReport {
  double training_steps_per_second = 0.0;
  double offline_training_seconds = 0.0;  ///< train_steps / measured rate
  long measured_training_steps = 0;
  std::vector<LatencyEntry> entries;
  bool trained_weights = false;
  std::uint64_t reward_evaluations_in_timed_regions = 0;
  std::string render() const;
};

/// Median per-decision wall time of `decide` over pre-drawn contexts after a
/// warm-up. Contexts are generated before timing; reward evaluation never
/// happens inside the timed region.
std::vector<double> time_decisions(const std::vector<env::Episode>& contexts, int warmup,
                                   const drl::Policy& decide);

/// DRL forward+projection vs full AO solves at the first scenario point.
/// Uses the first available checkpoint of each learned algorithm, else
/// untrained weights. Writes latency_report.txt.
LatencyReport run_latency(const ExperimentConfig& cfg, std::ostream& log);

struct ComplexityReport {
  std::size_t actor_params = 0;   ///< P_a
  std::size_t critic_params = 0;  ///< P_c
  std::vector<std::pair<std::string, std::string>> formulas;  ///< label, instantiated formula
  double env_step_ms = 0.0;       ///< at S
  double env_step_ms_double = 0.0;  ///< at 2S
  double env_steps_per_second = 0.0;
  std::string render() const;
};

/// Per-step cost formulas plus a timing fit of the environment step.
/// `timing_reps` = 0 skips the measurements.
ComplexityReport report_complexity(const ExperimentConfig& cfg, int timing_reps = 400);

/// Closed-form parameter count of a dense MLP.
std::size_t mlp_parameter_count(const std::vector<int>& dims);

}  // namespace uavris::harness
