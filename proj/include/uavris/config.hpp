#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uavris/agent.hpp"
#include "uavris/baselines.hpp"
#include "uavris/channel_model.hpp"
#include "uavris/environment.hpp"

namespace uavris::harness {

enum class ScenarioKind { ideal, jitter, csi, combined, sweep };

std::string to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

/// One (sigma_j, rho) operating point. `sigma_j_deg` is kept for reports
/// only; the model consumes `sigma_j` (radians).
struct ScenarioPoint {
  std::string name;
  std::string axis;  ///< ideal | jitter | csi | combined
  double sigma_j_deg = 0.0;
  double sigma_j = 0.0;
  double rho = 1.0;
};

struct CombinedLevel {
  std::string name;
  double rho;
  double sigma_j_deg;
};

/// L0..L4 joint CSI-quality / jitter levels.
const std::vector<CombinedLevel>& combined_levels();

/// Algorithm names accepted in `algorithms`:
///   td3, ddpg           trained agents controlling G and the RIS
///   td3_bf, ddpg_bf     beamformer-only agents with a fixed random RIS
///   ao_wmmse, ao_wmmse_saa, random   non-learned baselines
bool is_learned(const std::string& algorithm);
bool is_beamformer_only(const std::string& algorithm);
void validate_algorithm(const std::string& algorithm);

struct ExperimentConfig {
  channel::SystemConfig system;
  drl::AgentConfig agent;
  baselines::AoConfig ao;
  int samples = 6;  ///< Monte Carlo reward samples S
  env::StateScaling state_scaling = env::StateScaling::standardize;
  int standardizer_episodes = 2000;

  ScenarioKind kind = ScenarioKind::ideal;
  std::vector<double> sigma_j_deg{0, 2, 4, 6, 8, 10};
  std::vector<double> rho{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  std::vector<std::string> levels{"L0", "L1", "L2", "L3", "L4"};

  std::vector<std::string> algorithms{"td3", "ddpg"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  long train_steps = 50000;
  long eval_episodes = 500;
  std::uint64_t eval_seed = 20250101;
  std::uint64_t experiment_seed = 7;  ///< user pool and fixed BF-only phases
  int pool_size = 40;
  int latency_decisions = 1000;
  int latency_warmup = 100;
  long latency_train_steps = 2000;
  std::string output_dir = "results";

  /// Expanded operating points, radians filled in.
  std::vector<ScenarioPoint> points() const;
  void apply_paper_scale();
  void validate() const;
};

/// Parses and validates INI text. Unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies one `section.key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Canonical text of everything that shapes a trained network for `point`
/// and `algorithm`; its hash is stored in checkpoints.
std::string training_signature(const ExperimentConfig& cfg, const ScenarioPoint& point,
                               const std::string& algorithm);
std::uint64_t fnv1a(const std::string& text);

}  // namespace uavris::harness
