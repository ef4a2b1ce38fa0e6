#include "uavris/agent.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include <fmt/core.h>

namespace uavris::drl {

std::string to_string(Algorithm a) { return a == Algorithm::ddpg ? "ddpg" : "td3"; }

Algorithm parse_algorithm(const std::string& s) {
  if (s == "ddpg") return Algorithm::ddpg;
  if (s == "td3") return Algorithm::td3;
  throw ConfigError(fmt::format("unknown algorithm '{}'", s));
}

AgentConfig AgentConfig::ddpg() {
  AgentConfig c;
  c.algorithm = Algorithm::ddpg;
  c.twin_critics = false;
  c.policy_delay = 1;
  return c;
}

AgentConfig AgentConfig::td3() { return AgentConfig{}; }

void AgentConfig::validate() const {
  if (gamma != 0.0) throw ConfigError("discount factor must be 0 in the contextual-bandit formulation");
  if (policy_delay < 1) throw ConfigError("policy delay must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (buffer_capacity < batch_size) throw ConfigError("replay buffer smaller than one batch");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (noise_beamformer < 0.0 || noise_ris < 0.0) throw ConfigError("exploration noise must be non-negative");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
}

ReplayBuffer::ReplayBuffer(int capacity, int state_dim, int action_dim)
    : capacity_(capacity), states_(state_dim, capacity), actions_(action_dim, capacity), rewards_(capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(const RVector& state, const RVector& action, double reward) {
  states_.col(head_) = state;
  actions_.col(head_) = action;
  rewards_(head_) = reward;
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<int> pick(0, size_ - 1);
  Batch b{RMatrix(states_.rows(), batch_size), RMatrix(actions_.rows(), batch_size), RVector(batch_size)};
  for (int i = 0; i < batch_size; ++i) {
    const int j = pick(rng);
    b.states.col(i) = states_.col(j);
    b.actions.col(i) = actions_.col(j);
    b.rewards(i) = rewards_(j);
  }
  return b;
}

Agent::Agent(const AgentConfig& cfg, const env::ActionMapper& mapper, int state_dim, Rng& init_rng)
    : cfg_(cfg), mapper_(mapper), state_dim_(state_dim) {
  cfg_.validate();
  const AdamConfig adam{cfg_.learning_rate};
  const int h = cfg_.hidden;
  actor_ = TrainableMlp(Mlp({state_dim, h, h, mapper_.raw_dim()}, init_rng), adam);
  const int critic_in = state_dim + mapper_.feature_dim();
  critics_.emplace_back(Mlp({critic_in, h, h, 1}, init_rng), adam);
  if (cfg_.twin_critics) critics_.emplace_back(Mlp({critic_in, h, h, 1}, init_rng), adam);
}

RVector Agent::actor_forward(const RVector& state) const {
  if (state.size() != state_dim_) throw DimensionError("actor_forward: state dimension mismatch");
  return actor_.net.forward(state);
}

double Agent::critic_forward(const RVector& state, const RVector& action_features, int critic) const {
  RMatrix x(state_dim_ + action_features.size(), 1);
  x << state, action_features;
  return critics_.at(static_cast<std::size_t>(critic)).net.forward(x)(0, 0);
}

ActionChoice Agent::select_action(const RVector& state, bool explore, Rng& rng) const {
  ActionChoice c;
  c.raw = actor_forward(state);
  if (explore) {
    const int bf = mapper_.layout().beamformer_dim();
    for (Eigen::Index i = 0; i < c.raw.size(); ++i) {
      const double sd = i < bf ? cfg_.noise_beamformer : cfg_.noise_ris;
      const double z = standard_normal(rng);
      c.raw(i) += sd * z;
    }
  }
  c.feasible = mapper_.project(c.raw);
  c.features = mapper_.features(c.feasible);
  return c;
}

RMatrix Agent::critic_input(const RMatrix& states, const RMatrix& actions) const {
  RMatrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

double Agent::critic_step(TrainableMlp& critic, const Batch& batch) {
  const RMatrix x = critic_input(batch.states, batch.actions);
  Tape tape;
  const RMatrix q = critic.net.forward(x, tape);
  const RVector err = q.row(0).transpose() - batch.rewards;
  const double B = static_cast<double>(batch.rewards.size());
  const RMatrix dq = (2.0 / B) * err.transpose();
  critic.grads.set_zero();
  critic.net.backward(tape, dq, &critic.grads);
  critic.opt.step(critic.net, critic.grads);
  return err.squaredNorm() / B;
}

MlpGrads Agent::actor_gradient(const RMatrix& states) const {
  Tape actor_tape;
  const RMatrix raw = actor_.net.forward(states, actor_tape);
  const Eigen::Index B = states.cols();
  RMatrix features(mapper_.feature_dim(), B);
  for (Eigen::Index i = 0; i < B; ++i) features.col(i) = mapper_.features(mapper_.project(raw.col(i)));
  const RMatrix x = critic_input(states, features);

  // Maximise the batch mean of Q: dL/dQ = -1/B on the critic used per sample.
  const double scale = -1.0 / static_cast<double>(B);
  RMatrix dx;
  if (cfg_.actor_source == ActorCriticSource::min && critics_.size() > 1) {
    Tape t1, t2;
    const RMatrix q1 = critics_[0].net.forward(x, t1);
    const RMatrix q2 = critics_[1].net.forward(x, t2);
    RMatrix d1 = RMatrix::Zero(1, B), d2 = RMatrix::Zero(1, B);
    for (Eigen::Index i = 0; i < B; ++i) (q1(0, i) <= q2(0, i) ? d1 : d2)(0, i) = scale;
    dx = critics_[0].net.backward(t1, d1, nullptr) + critics_[1].net.backward(t2, d2, nullptr);
  } else {
    Tape t1;
    critics_[0].net.forward(x, t1);
    dx = critics_[0].net.backward(t1, RMatrix::Constant(1, B, scale), nullptr);
  }

  const RMatrix d_features = dx.bottomRows(mapper_.feature_dim());
  RMatrix d_raw(raw.rows(), B);
  for (Eigen::Index i = 0; i < B; ++i) d_raw.col(i) = mapper_.vjp(raw.col(i), d_features.col(i));

  MlpGrads g = actor_.net.make_grads();
  actor_.net.backward(actor_tape, d_raw, &g);
  return g;
}

void Agent::actor_step(const RMatrix& states) {
  actor_.grads = actor_gradient(states);
  actor_.opt.step(actor_.net, actor_.grads);
  ++actor_updates_;
}

UpdateStats Agent::update(const Batch& batch, long step_index) {
  UpdateStats s;
  double loss = 0.0;
  for (auto& c : critics_) loss += critic_step(c, batch);
  s.critic_loss = loss / static_cast<double>(critics_.size());
  ++critic_updates_;
  if (step_index % cfg_.policy_delay == 0) {
    actor_step(batch.states);
    s.actor_updated = true;
  }
  return s;
}

std::vector<double> rolling_mean(const std::vector<double>& x, int window) {
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= static_cast<std::size_t>(window)) sum -= x[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

namespace {

bool is_feasible(const env::FeasibleAction& a, double p_max) {
  if (a.G.squaredNorm() > p_max + 1e-9) return false;
  for (Eigen::Index n = 0; n < a.phi.size(); ++n)
    if (std::abs(std::abs(a.phi(n)) - 1.0) > 1e-12) return false;
  return true;
}

}  // namespace

TrainStats train(Agent& agent, const env::Environment& env, long steps, RngStreams& streams,
                 const std::function<void(long, const TrainStats&)>& progress) {
  TrainStats stats;
  stats.rewards.reserve(static_cast<std::size_t>(steps));
  stats.critic_loss.reserve(static_cast<std::size_t>(steps));
  const auto& cfg = agent.config();
  ReplayBuffer buffer(cfg.buffer_capacity, env.state_dim(), agent.mapper().feature_dim());
  const auto t0 = std::chrono::steady_clock::now();
  long update_index = 0;
  for (long t = 0; t < steps; ++t) {
    const env::Episode ep = env.reset(streams.placement, streams.nlos);
    const ActionChoice choice = agent.select_action(ep.state, true, streams.exploration);
    if (!is_feasible(choice.feasible, env.downlink().cfg.p_max)) ++stats.infeasible_actions;
    const env::StepResult r = env.step(ep.ctx, choice.raw, streams.jitter, streams.csi);
    buffer.push(ep.state, choice.features, r.reward);
    double loss = std::nan("");
    if (buffer.size() >= cfg.batch_size) {
      const Batch batch = buffer.sample(cfg.batch_size, streams.replay);
      loss = agent.update(batch, update_index++).critic_loss;
    }
    stats.rewards.push_back(r.reward);
    stats.critic_loss.push_back(loss);
    if (progress && (t + 1) % 1000 == 0) progress(t + 1, stats);
  }
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stats.steps_per_second = stats.wall_seconds > 0.0 ? static_cast<double>(steps) / stats.wall_seconds : 0.0;
  stats.smoothed = rolling_mean(stats.rewards, kSmoothingWindow);
  return stats;
}

std::uint64_t episode_seed(std::uint64_t eval_seed, long episode) {
  return mix_seed(eval_seed, static_cast<std::uint64_t>(episode));
}

EvalResult evaluate_policy(const env::Environment& env, long episodes, std::uint64_t eval_seed,
                           const Policy& policy) {
  EvalResult out;
  out.rewards.reserve(static_cast<std::size_t>(episodes));
  double total = 0.0;
  for (long e = 0; e < episodes; ++e) {
    const std::uint64_t seed = episode_seed(eval_seed, e);
    RngStreams streams(seed);
    const env::Episode ep = env.reset(streams.placement, streams.nlos);
    const env::FeasibleAction a = policy(ep, seed);
    const auto r = env::monte_carlo_reward(env.downlink(), ep.ctx, a.G, a.phi, env.uncertainty(), streams.jitter,
                                           streams.csi);
    out.episode_seeds.push_back(seed);
    out.rewards.push_back(r.reward);
    total += r.reward;
  }
  out.mean = episodes > 0 ? total / static_cast<double>(episodes) : 0.0;
  return out;
}

EvalResult evaluate(const Agent& agent, const env::Environment& env, long episodes, std::uint64_t eval_seed) {
  Rng unused(0);
  return evaluate_policy(env, episodes, eval_seed, [&](const env::Episode& ep, std::uint64_t) {
    return agent.select_action(ep.state, false, unused).feasible;
  });
}

Policy random_policy(const env::ActionMapper& mapper, std::uint64_t seed) {
  return [mapper, seed](const env::Episode&, std::uint64_t episode) {
    Rng rng = make_stream(mix_seed(seed, episode), static_cast<std::uint64_t>(Stream::exploration));
    RVector raw(mapper.raw_dim());
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = standard_normal(rng);
    return mapper.project(raw);
  };
}

}  // namespace uavris::drl
