#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uavris/environment.hpp"
#include "uavris/mlp.hpp"

namespace uavris::drl {

enum class Algorithm { ddpg, td3 };
enum class ActorCriticSource { q1, min };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

struct AgentConfig {
  Algorithm algorithm = Algorithm::td3;
  double learning_rate = 1e-4;
  int batch_size = 32;
  double gamma = 0.0;  ///< must stay 0: one-step episodes
  int policy_delay = 3;
  bool twin_critics = true;
  ActorCriticSource actor_source = ActorCriticSource::q1;
  double noise_beamformer = 0.2;
  double noise_ris = 0.1;
  long train_steps = 200000;
  int buffer_capacity = 20000;
  int hidden = 256;

  static AgentConfig ddpg();
  static AgentConfig td3();
  void validate() const;
};

struct Batch {
  RMatrix states;   ///< state_dim x B
  RMatrix actions;  ///< feature_dim x B, executed feasible actions
  RVector rewards;  ///< B
};

/// Fixed-capacity circular store of (state, feasible action, reward).
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim, int action_dim);

  void push(const RVector& state, const RVector& action, double reward);
  /// Uniform with replacement over the current fill.
  Batch sample(int batch_size, Rng& rng) const;

  int size() const { return size_; }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  RMatrix states_, actions_;
  RVector rewards_;
  int size_ = 0;
  int head_ = 0;
};

struct ActionChoice {
  RVector raw;
  env::FeasibleAction feasible;
  RVector features;
};

struct UpdateStats {
  double critic_loss = 0.0;  ///< mean over active critics
  bool actor_updated = false;
};

/// Constrained contextual-bandit actor-critic. DDPG and TD3 share this type:
/// TD3 adds a second critic and delays actor steps by `policy_delay`.
/// No target networks are kept; the critic target is the immediate reward.
class Agent {
 public:
  Agent(const AgentConfig& cfg, const env::ActionMapper& mapper, int state_dim, Rng& init_rng);

  const AgentConfig& config() const { return cfg_; }
  const env::ActionMapper& mapper() const { return mapper_; }
  int state_dim() const { return state_dim_; }

  RVector actor_forward(const RVector& state) const;
  double critic_forward(const RVector& state, const RVector& action_features, int critic = 0) const;

  /// Noise-before-projection: Pi(mu(s) + N) when exploring, Pi(mu(s)) otherwise.
  ActionChoice select_action(const RVector& state, bool explore, Rng& rng) const;

  /// One critic regression step (both critics when twin) and, when
  /// step_index % policy_delay == 0, one actor ascent step.
  UpdateStats update(const Batch& batch, long step_index);

  /// Critic regression towards y = r only. Returns the pre-step MSE.
  double critic_step(TrainableMlp& critic, const Batch& batch);
  /// Gradient of mean_s Q(s, Pi(mu(s))) w.r.t. actor parameters (no step taken).
  MlpGrads actor_gradient(const RMatrix& states) const;
  void actor_step(const RMatrix& states);

  long actor_updates() const { return actor_updates_; }
  long critic_updates() const { return critic_updates_; }

  TrainableMlp& actor() { return actor_; }
  const TrainableMlp& actor() const { return actor_; }
  std::vector<TrainableMlp>& critics() { return critics_; }
  const std::vector<TrainableMlp>& critics() const { return critics_; }

 private:
  RMatrix critic_input(const RMatrix& states, const RMatrix& actions) const;

  AgentConfig cfg_;
  env::ActionMapper mapper_;
  int state_dim_;
  TrainableMlp actor_;
  std::vector<TrainableMlp> critics_;
  long actor_updates_ = 0;
  long critic_updates_ = 0;
};

inline constexpr int kSmoothingWindow = 2000;

struct TrainStats {
  std::vector<double> rewards;
  std::vector<double> smoothed;  ///< trailing mean over kSmoothingWindow steps
  std::vector<double> critic_loss;
  double wall_seconds = 0.0;
  double steps_per_second = 0.0;
  long infeasible_actions = 0;
};

/// Trailing rolling mean; early entries average what is available.
std::vector<double> rolling_mean(const std::vector<double>& x, int window);

/// T one-step episodes: reset, explore, step, store, sample, update.
/// `progress` (optional) is called every 1000 steps with the step count.
TrainStats train(Agent& agent, const env::Environment& env, long steps, RngStreams& streams,
                 const std::function<void(long, const TrainStats&)>& progress = {});

struct EvalResult {
  std::vector<std::uint64_t> episode_seeds;
  std::vector<double> rewards;
  double mean = 0.0;
};

/// Maps a context (and its episode seed, for policies that need their own
/// randomness) to a feasible action.
using Policy = std::function<env::FeasibleAction(const env::Episode&, std::uint64_t)>;

/// Seed of evaluation episode e; shared by every policy so contexts pair up.
std::uint64_t episode_seed(std::uint64_t eval_seed, long episode);

/// Runs `episodes` paired contexts: episode e draws its context and reward
/// randomness from streams seeded by episode_seed(eval_seed, e).
EvalResult evaluate_policy(const env::Environment& env, long episodes, std::uint64_t eval_seed,
                           const Policy& policy);

/// Exploration-free evaluation of the deterministic actor.
EvalResult evaluate(const Agent& agent, const env::Environment& env, long episodes, std::uint64_t eval_seed);

/// Raw action entries i.i.d. N(0, 1), projected; drawn from a stream keyed by
/// the seed and the episode seed, so each decision is independent of call order.
Policy random_policy(const env::ActionMapper& mapper, std::uint64_t seed);

}  // namespace uavris::drl
