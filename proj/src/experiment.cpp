#include "uavris/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "uavris/baselines.hpp"
#include "uavris/checkpoint.hpp"
#include "uavris/stats.hpp"

namespace fs = std::filesystem;

namespace uavris::harness {

namespace {

constexpr std::uint64_t kStandardizerPlacement = 20;
constexpr std::uint64_t kStandardizerNlos = 21;
constexpr std::uint64_t kSaaJitter = 30;
constexpr std::uint64_t kSaaCsi = 31;
constexpr std::uint64_t kLatencyContexts = 40;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error(fmt::format("cannot create output directory '{}'", dir.string()));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::vector<std::string> learned(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& a : cfg.algorithms)
    if (is_learned(a)) out.push_back(a);
  return out;
}

env::FeasibleAction from_ao(const baselines::AoResult& r) {
  env::FeasibleAction a;
  a.G = r.G;
  a.phi = r.phi;
  return a;
}

std::uint64_t signature_hash(const ExperimentConfig& cfg, const ScenarioPoint& p, const std::string& alg) {
  return fnv1a(training_signature(cfg, p, alg));
}

drl::Agent make_agent(const ExperimentConfig& cfg, const env::Environment& env, const std::string& algorithm,
                      std::uint64_t seed) {
  RngStreams streams(seed);
  return drl::Agent(agent_config(cfg, algorithm), env.mapper(), env.state_dim(), streams.init);
}

}  // namespace

env::Environment make_environment(const ExperimentConfig& cfg, const ScenarioPoint& point,
                                  const std::string& algorithm) {
  Rng pool_rng = make_stream(cfg.experiment_seed, static_cast<std::uint64_t>(Stream::pool));
  env::EpisodePool pool = env::make_user_pool(cfg.pool_size, pool_rng);
  std::optional<CVector> fixed_phi;
  if (is_beamformer_only(algorithm)) {
    Rng phase_rng = make_stream(cfg.experiment_seed, static_cast<std::uint64_t>(Stream::phases));
    fixed_phi = baselines::fixed_random_phases(cfg.system.N, phase_rng);
  }
  env::UncertaintyConfig u{point.sigma_j, point.rho, cfg.samples};
  env::Environment e(cfg.system, u, std::move(pool), fixed_phi);
  if (cfg.state_scaling == env::StateScaling::standardize) {
    Rng a = make_stream(cfg.experiment_seed, kStandardizerPlacement);
    Rng b = make_stream(cfg.experiment_seed, kStandardizerNlos);
    e.fit_standardizer(cfg.standardizer_episodes, a, b);
  }
  return e;
}

drl::AgentConfig agent_config(const ExperimentConfig& cfg, const std::string& algorithm) {
  drl::AgentConfig a = cfg.agent;
  const bool ddpg = algorithm == "ddpg" || algorithm == "ddpg_bf";
  a.algorithm = ddpg ? drl::Algorithm::ddpg : drl::Algorithm::td3;
  a.twin_critics = !ddpg;
  if (ddpg) a.policy_delay = 1;
  a.train_steps = cfg.train_steps;
  return a;
}

drl::Policy baseline_policy(const ExperimentConfig& cfg, const env::Environment& env, const std::string& algorithm) {
  if (algorithm == "ao_wmmse") {
    return [&cfg, &env](const env::Episode& ep, std::uint64_t) {
      return from_ao(baselines::ao_wmmse(env.downlink(), ep.ctx, cfg.ao));
    };
  }
  if (algorithm == "ao_wmmse_saa") {
    return [&cfg, &env](const env::Episode& ep, std::uint64_t seed) {
      Rng j = make_stream(seed, kSaaJitter), c = make_stream(seed, kSaaCsi);
      return from_ao(baselines::ao_wmmse_saa(env.downlink(), ep.ctx, env.uncertainty(), cfg.ao, j, c));
    };
  }
  if (algorithm == "random") return drl::random_policy(env.mapper(), cfg.eval_seed);
  throw ConfigError(fmt::format("'{}' is not a baseline", algorithm));
}

std::string cell_name(const std::string& algorithm, const ScenarioPoint& point, std::uint64_t seed) {
  return fmt::format("{}__{}__seed{}", algorithm, point.name, seed);
}

std::string checkpoint_path(const ExperimentConfig& cfg, const std::string& algorithm, const ScenarioPoint& point,
                            std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / "checkpoints" / (cell_name(algorithm, point, seed) + ".ckpt")).string();
}

std::vector<TrainingRecord> run_training(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path root(cfg.output_dir);
  ensure_dir(root / "checkpoints");
  ensure_dir(root / "curves");
  const auto algs = learned(cfg);
  std::vector<TrainingRecord> records;
  if (algs.empty()) {
    log << "no learned algorithms selected, nothing to train\n";
    return records;
  }
  // points with identical training settings (e.g. jitter_0deg and csi_rho1) share one run
  std::map<std::pair<std::uint64_t, std::uint64_t>, TrainingRecord> done;
  for (const auto& point : cfg.points()) {
    for (const auto& alg : algs) {
      const std::uint64_t hash = signature_hash(cfg, point, alg);
      std::optional<env::Environment> environment;
      for (const auto seed : cfg.seeds) {
        const std::string cell = cell_name(alg, point, seed);
        if (auto it = done.find({hash, seed}); it != done.end()) {
          const TrainingRecord& src = it->second;
          const std::string from = cell_name(src.algorithm, src.point, seed);
          fs::copy_file(checkpoint_path(cfg, alg, src.point, seed), checkpoint_path(cfg, alg, point, seed),
                        fs::copy_options::overwrite_existing);
          fs::copy_file(root / "curves" / (from + ".csv"), root / "curves" / (cell + ".csv"),
                        fs::copy_options::overwrite_existing);
          TrainingRecord r = src;
          r.point = point;
          r.wall_seconds = 0.0;
          fmt::print(log, "reused {} for {}\n", from, cell);
          records.push_back(r);
          continue;
        }
        if (!environment) environment.emplace(make_environment(cfg, point, alg));
        RngStreams streams(seed);
        drl::Agent agent(agent_config(cfg, alg), environment->mapper(), environment->state_dim(), streams.init);
        const drl::TrainStats stats = drl::train(agent, *environment, cfg.train_steps, streams);
        save_checkpoint(checkpoint_path(cfg, alg, point, seed), agent, hash);

        auto curve = open_out(root / "curves" / (cell + ".csv"));
        curve << "step,raw_reward,smoothed_reward\n";
        for (std::size_t t = 0; t < stats.rewards.size(); ++t)
          fmt::print(curve, "{},{:.9g},{:.9g}\n", t + 1, stats.rewards[t], stats.smoothed[t]);

        TrainingRecord r{alg, point, seed, stats.smoothed.back(), stats.infeasible_actions, stats.wall_seconds};
        fmt::print(log, "trained {}: final smoothed {:.4f} bps/Hz, {:.1f} s\n", cell, r.final_smoothed,
                   r.wall_seconds);
        records.push_back(r);
        done.emplace(std::make_pair(hash, seed), r);
      }
    }
  }

  auto summary = open_out(root / "training_summary.csv");
  summary << "algorithm,point,sigma_j_deg,rho,seed,steps,final_smoothed_reward,infeasible_actions\n";
  for (const auto& r : records)
    fmt::print(summary, "{},{},{:g},{:g},{},{},{:.9g},{}\n", r.algorithm, r.point.name, r.point.sigma_j_deg,
               r.point.rho, r.seed, cfg.train_steps, r.final_smoothed, r.infeasible_actions);
  auto timing = open_out(root / "training_timing.txt");
  for (const auto& r : records)
    fmt::print(timing, "{} {:.3f} s\n", cell_name(r.algorithm, r.point, r.seed), r.wall_seconds);
  return records;
}

std::vector<EvalSummaryRow> run_evaluation(const ExperimentConfig& cfg, std::ostream& log, EvalSelection selection) {
  cfg.validate();
  const fs::path root(cfg.output_dir);
  ensure_dir(root);
  const std::string prefix = selection == EvalSelection::all ? "eval" : "baseline";
  auto episodes_csv = open_out(root / (prefix + "_episodes.csv"));
  auto seeds_csv = open_out(root / (prefix + "_seeds.csv"));
  episodes_csv << "algorithm,point,seed,episode,episode_seed,throughput\n";
  seeds_csv << "algorithm,point,seed,mean_throughput\n";

  std::vector<EvalSummaryRow> rows;
  for (const auto& point : cfg.points()) {
    for (const auto& alg : cfg.algorithms) {
      const bool is_drl = is_learned(alg);
      if (is_drl && selection == EvalSelection::baselines_only) continue;
      const env::Environment environment = make_environment(cfg, point, alg);
      auto emit = [&](const std::string& seed_label, const drl::EvalResult& r) {
        for (std::size_t e = 0; e < r.rewards.size(); ++e)
          fmt::print(episodes_csv, "{},{},{},{},{},{:.9g}\n", alg, point.name, seed_label, e, r.episode_seeds[e],
                     r.rewards[e]);
        fmt::print(seeds_csv, "{},{},{},{:.9g}\n", alg, point.name, seed_label, r.mean);
      };
      EvalSummaryRow row{alg, point};
      if (is_drl) {
        std::vector<double> means;
        for (const auto seed : cfg.seeds) {
          drl::Agent agent = make_agent(cfg, environment, alg, seed);
          load_checkpoint(checkpoint_path(cfg, alg, point, seed), agent, signature_hash(cfg, point, alg));
          const auto r = drl::evaluate(agent, environment, cfg.eval_episodes, cfg.eval_seed);
          emit(std::to_string(seed), r);
          means.push_back(r.mean);
        }
        const Summary s = summarize(means);
        row.n_seeds = s.n;
        row.mean = s.mean;
        row.ci95_half = s.ci95_half;
      } else {
        const auto r =
            drl::evaluate_policy(environment, cfg.eval_episodes, cfg.eval_seed, baseline_policy(cfg, environment, alg));
        emit("-", r);
        row.mean = r.mean;
      }
      fmt::print(log, "evaluated {} at {}: {:.4f} bps/Hz\n", alg, point.name, row.mean);
      rows.push_back(row);
    }
  }

  auto summary = open_out(root / (prefix + "_summary.csv"));
  summary << "algorithm,point,axis,sigma_j_deg,rho,n_seeds,mean,ci95_half,ci95_low,ci95_high\n";
  for (const auto& r : rows) {
    if (r.n_seeds > 0) {
      fmt::print(summary, "{},{},{},{:g},{:g},{},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.algorithm, r.point.name,
                 r.point.axis, r.point.sigma_j_deg, r.point.rho, r.n_seeds, r.mean, r.ci95_half,
                 r.mean - r.ci95_half, r.mean + r.ci95_half);
    } else {
      fmt::print(summary, "{},{},{},{:g},{:g},0,{:.9g},,,\n", r.algorithm, r.point.name, r.point.axis,
                 r.point.sigma_j_deg, r.point.rho, r.mean);
    }
  }
  return rows;
}

std::vector<DegradationRow> degradation(const std::vector<EvalSummaryRow>& rows) {
  // group by (algorithm, axis) keeping first-seen order
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<const EvalSummaryRow*>> groups;
  for (const auto& r : rows) {
    if (r.point.axis == "ideal") continue;
    const auto key = std::make_pair(r.algorithm, r.point.axis);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<DegradationRow> out;
  for (const auto& key : keys) {
    const auto& g = groups[key];
    if (g.size() < 2) continue;
    const EvalSummaryRow* from = g.front();
    for (const auto* r : g)
      if (r->point.sigma_j == 0.0 && r->point.rho == 1.0) {
        from = r;
        break;
      }
    const EvalSummaryRow* to = g.back();
    if (to == from) continue;
    DegradationRow d{key.first, key.second, from->point.name, to->point.name, from->mean, to->mean, 0.0};
    d.relative = from->mean != 0.0 ? (from->mean - to->mean) / from->mean : 0.0;
    out.push_back(d);
  }
  return out;
}

void write_degradation_csv(const std::string& path, const std::vector<DegradationRow>& rows) {
  auto out = open_out(path);
  out << "algorithm,axis,from_point,to_point,mean_from,mean_to,relative_degradation\n";
  for (const auto& d : rows)
    fmt::print(out, "{},{},{},{},{:.9g},{:.9g},{:.9g}\n", d.algorithm, d.axis, d.from_point, d.to_point, d.mean_from,
               d.mean_to, d.relative);
}

std::vector<DegradationRow> run_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  run_training(cfg, log);
  const auto rows = run_evaluation(cfg, log);
  auto d = degradation(rows);
  write_degradation_csv((fs::path(cfg.output_dir) / "degradation.csv").string(), d);
  for (const auto& r : d)
    fmt::print(log, "{} {}: {} -> {} degrades {:.1f}%\n", r.algorithm, r.axis, r.from_point, r.to_point,
               100.0 * r.relative);
  return d;
}

std::vector<double> time_decisions(const std::vector<env::Episode>& contexts, int warmup, const drl::Policy& decide) {
  using clock = std::chrono::steady_clock;
  if (contexts.empty()) throw std::invalid_argument("time_decisions: no contexts");
  std::size_t i = 0;
  double sink = 0.0;
  for (int w = 0; w < warmup; ++w, ++i) sink += decide(contexts[i % contexts.size()], i).G.norm();
  std::vector<double> ms;
  ms.reserve(contexts.size());
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    const auto t0 = clock::now();
    const env::FeasibleAction a = decide(contexts[k], k);
    const auto t1 = clock::now();
    sink += a.G.norm();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  // keep the decisions observable to the optimiser
  if (sink < 0.0) ms.push_back(sink);
  return ms;
}

std::string LatencyReport::render() const {
  std::ostringstream s;
  fmt::print(s, "training steps/s            {:.1f} (measured over {} steps)\n", training_steps_per_second,
             measured_training_steps);
  fmt::print(s, "offline training time (s)   {:.1f} (estimated from the measured rate)\n", offline_training_seconds);
  fmt::print(s, "agent weights               {}\n", trained_weights ? "trained checkpoint" : "untrained");
  fmt::print(s, "{:<28}{:>14}{:>12}\n", "algorithm", "median ms", "decisions");
  for (const auto& e : entries) fmt::print(s, "{:<28}{:>14.4f}{:>12}\n", e.algorithm, e.median_ms, e.decisions);
  fmt::print(s, "reward evaluations inside timed regions: {}\n", reward_evaluations_in_timed_regions);
  return s.str();
}

LatencyReport run_latency(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ScenarioPoint point = cfg.points().front();
  LatencyReport report;

  std::vector<std::string> drl_algs = learned(cfg);
  if (drl_algs.empty()) drl_algs = {"td3"};
  const env::Environment ref = make_environment(cfg, point, drl_algs.front());
  Rng ctx_rng = make_stream(cfg.eval_seed, kLatencyContexts);
  Rng ctx_nlos = make_stream(cfg.eval_seed, kLatencyContexts + 1);
  std::vector<env::Episode> contexts;
  for (int i = 0; i < cfg.latency_decisions; ++i) contexts.push_back(ref.reset(ctx_rng, ctx_nlos));

  std::uint64_t reward_calls = 0;
  auto timed = [&](const std::string& name, const std::vector<env::Episode>& ctxs, const drl::Policy& p) {
    const auto before = env::reward_evaluation_count();
    const auto ms = time_decisions(ctxs, cfg.latency_warmup, p);
    reward_calls += env::reward_evaluation_count() - before;
    report.entries.push_back({name, median(ms), static_cast<int>(ctxs.size())});
    fmt::print(log, "latency {}: {:.4f} ms median\n", name, report.entries.back().median_ms);
  };

  for (const auto& alg : drl_algs) {
    const env::Environment environment = make_environment(cfg, point, alg);
    drl::Agent agent = make_agent(cfg, environment, alg, cfg.seeds.front());
    const auto path = checkpoint_path(cfg, alg, point, cfg.seeds.front());
    if (fs::exists(path)) {
      load_checkpoint(path, agent, signature_hash(cfg, point, alg));
      report.trained_weights = true;
    }
    // states must match this environment's encoding (BF-only shares it)
    std::vector<env::Episode> ctxs = contexts;
    for (auto& c : ctxs) c.state = environment.encode_state(c.ctx);
    Rng unused(0);
    timed(alg, ctxs, [&](const env::Episode& ep, std::uint64_t) {
      return agent.select_action(ep.state, false, unused).feasible;
    });
  }
  timed("ao_wmmse", contexts, baseline_policy(cfg, ref, "ao_wmmse"));
  timed("ao_wmmse_saa", contexts, baseline_policy(cfg, ref, "ao_wmmse_saa"));
  report.reward_evaluations_in_timed_regions = reward_calls;

  // training throughput from a short run
  {
    const env::Environment environment = make_environment(cfg, point, drl_algs.front());
    RngStreams streams(cfg.seeds.front());
    drl::Agent agent(agent_config(cfg, drl_algs.front()), environment.mapper(), environment.state_dim(), streams.init);
    const auto stats = drl::train(agent, environment, cfg.latency_train_steps, streams);
    report.measured_training_steps = cfg.latency_train_steps;
    report.training_steps_per_second = stats.steps_per_second;
    report.offline_training_seconds =
        stats.steps_per_second > 0.0 ? static_cast<double>(cfg.train_steps) / stats.steps_per_second : 0.0;
  }

  ensure_dir(cfg.output_dir);
  auto out = open_out(fs::path(cfg.output_dir) / "latency_report.txt");
  out << report.render();
  return report;
}

std::size_t mlp_parameter_count(const std::vector<int>& dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    n += static_cast<std::size_t>(dims[i]) * static_cast<std::size_t>(dims[i + 1]) +
         static_cast<std::size_t>(dims[i + 1]);
  return n;
}

std::string ComplexityReport::render() const {
  std::ostringstream s;
  fmt::print(s, "P_a (actor parameters)   {}\n", actor_params);
  fmt::print(s, "P_c (critic parameters)  {}\n", critic_params);
  for (const auto& [label, formula] : formulas) fmt::print(s, "{:<26}{}\n", label, formula);
  if (env_step_ms > 0.0) {
    fmt::print(s, "measured env step        {:.4f} ms at S, {:.4f} ms at 2S (ratio {:.2f})\n", env_step_ms,
               env_step_ms_double, env_step_ms_double / env_step_ms);
    fmt::print(s, "measured env steps/s     {:.1f}\n", env_steps_per_second);
  }
  return s.str();
}

ComplexityReport report_complexity(const ExperimentConfig& cfg, int timing_reps) {
  cfg.validate();
  const auto& sys = cfg.system;
  const int M = sys.M, N = sys.N, K = sys.K, S = cfg.samples;
  const int h = cfg.agent.hidden;
  const int state_dim = K + 2 * N * M + 2 * N * K;
  const int action_dim = 2 * M * K + 2 * N;

  ComplexityReport r;
  Rng rng(0);
  const drl::Mlp actor({state_dim, h, h, action_dim}, rng);
  const drl::Mlp critic({state_dim + action_dim, h, h, 1}, rng);
  r.actor_params = actor.parameter_count();
  r.critic_params = critic.parameter_count();

  const int B = cfg.agent.batch_size, delta = cfg.agent.policy_delay;
  const double pa = static_cast<double>(r.actor_params), pc = static_cast<double>(r.critic_params);
  const auto& ao = cfg.ao;
  r.formulas = {
      {"environment step", fmt::format("O(S K^2 N M) = {}*{}^2*{}*{} = {}", S, K, N, M, S * K * K * N * M)},
      {"DDPG update", fmt::format("O(B (P_c + P_a)) = {}*({} + {}) = {:.4g}", B, r.critic_params, r.actor_params,
                                  B * (pc + pa))},
      {"TD3 update", fmt::format("O(B (2 P_c + P_a / delta)) = {}*(2*{} + {}/{}) = {:.4g}", B, r.critic_params,
                                 r.actor_params, delta, B * (2.0 * pc + pa / delta))},
      {"DRL inference", fmt::format("O(P_a) = {}", r.actor_params)},
      {"AO-WMMSE solve", fmt::format("O(a_max (w_in n_bisect M^3 + N^3)) = {}*({}*{}*{}^3 + {}^3) = {:.4g}", ao.a_max,
                                     ao.w_in, ao.n_bisect, M, N,
                                     static_cast<double>(ao.a_max) *
                                         (ao.w_in * ao.n_bisect * std::pow(M, 3) + std::pow(N, 3)))},
      {"AO-WMMSE-SAA solve",
       fmt::format("O(a_max (S_saa w_in K M^2 + w_in n_bisect M^3 + S_saa K N^2 + N^3)) with S_saa = {}: {:.4g}",
                   ao.s_saa,
                   static_cast<double>(ao.a_max) *
                       (ao.s_saa * ao.w_in * K * M * M + ao.w_in * ao.n_bisect * std::pow(M, 3) +
                        ao.s_saa * K * N * N + std::pow(N, 3)))},
  };

  if (timing_reps > 0) {
    const ScenarioPoint point{"timing", "jitter", 5.0, deg_to_rad(5.0), 0.9};
    auto time_env = [&](int samples) {
      ExperimentConfig c = cfg;
      c.samples = samples;
      const env::Environment environment = make_environment(c, point, "td3");
      RngStreams streams(cfg.seeds.front());
      std::vector<env::Episode> eps;
      std::vector<RVector> actions;
      for (int i = 0; i < timing_reps; ++i) {
        eps.push_back(environment.reset(streams.placement, streams.nlos));
        RVector a(environment.action_dim());
        for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = standard_normal(streams.exploration);
        actions.push_back(a);
      }
      double sink = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < timing_reps; ++i)
        sink += environment.step(eps[i].ctx, actions[i], streams.jitter, streams.csi).reward;
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / timing_reps;
      return sink < 0.0 ? -ms : ms;
    };
    time_env(S);  // warm caches
    r.env_step_ms = time_env(S);
    r.env_step_ms_double = time_env(2 * S);
    r.env_steps_per_second = 1000.0 / r.env_step_ms;
  }
  return r;
}

}  // namespace uavris::harness
