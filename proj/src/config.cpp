#include "uavris/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>
#include <fmt/ranges.h>

namespace uavris::harness {

namespace {

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, value, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    auto t = trim(p);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const long x = to_long(key, v);
  if (x < 0) throw ConfigError(fmt::format("{}: seeds must be non-negative", key));
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = boost::algorithm::to_lower_copy(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split_list(v)) out.push_back(to_double(key, p));
  return out;
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto xs = to_doubles(key, v);
  if (xs.size() != 3) throw ConfigError(fmt::format("{}: expected three comma-separated values", key));
  return {xs[0], xs[1], xs[2]};
}

/// "1,2,5" or a range "1..10".
std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  const auto dots = v.find("..");
  if (dots != std::string::npos) {
    const auto lo = to_u64(key, trim(v.substr(0, dots)));
    const auto hi = to_u64(key, trim(v.substr(dots + 2)));
    if (hi < lo) throw ConfigError(fmt::format("{}: empty seed range", key));
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const auto& p : split_list(v)) out.push_back(to_u64(key, p));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["system.M"] = [](auto& c, auto& k, auto& v) { c.system.M = static_cast<int>(to_long(k, v)); };
    t["system.N"] = [](auto& c, auto& k, auto& v) { c.system.N = static_cast<int>(to_long(k, v)); };
    t["system.K"] = [](auto& c, auto& k, auto& v) { c.system.K = static_cast<int>(to_long(k, v)); };
    t["system.carrier_hz"] = [](auto& c, auto& k, auto& v) { c.system.carrier_hz = to_double(k, v); };
    t["system.p_bs"] = [](auto& c, auto& k, auto& v) { c.system.p_bs = to_vec3(k, v); };
    t["system.q_uav"] = [](auto& c, auto& k, auto& v) { c.system.q_uav = to_vec3(k, v); };
    t["system.p_max"] = [](auto& c, auto& k, auto& v) { c.system.p_max = to_double(k, v); };
    t["system.noise_dbw"] = [](auto& c, auto& k, auto& v) { c.system.noise_dbw = to_double(k, v); };
    t["system.atg_a"] = [](auto& c, auto& k, auto& v) { c.system.atg_a = to_double(k, v); };
    t["system.atg_b"] = [](auto& c, auto& k, auto& v) { c.system.atg_b = to_double(k, v); };
    t["system.alpha1"] = [](auto& c, auto& k, auto& v) { c.system.alpha1 = to_double(k, v); };
    t["system.alpha2"] = [](auto& c, auto& k, auto& v) { c.system.alpha2 = to_double(k, v); };
    t["system.eta_nlos"] = [](auto& c, auto& k, auto& v) { c.system.eta_nlos = to_double(k, v); };
    t["system.kappa1"] = [](auto& c, auto& k, auto& v) { c.system.kappa1 = to_double(k, v); };
    t["system.kappa2"] = [](auto& c, auto& k, auto& v) { c.system.kappa2 = to_double(k, v); };
    t["system.rician_k1"] = [](auto& c, auto& k, auto& v) { c.system.rician_k1 = to_double(k, v); };
    t["system.rician_k2"] = [](auto& c, auto& k, auto& v) { c.system.rician_k2 = to_double(k, v); };

    t["environment.samples"] = [](auto& c, auto& k, auto& v) { c.samples = static_cast<int>(to_long(k, v)); };
    t["environment.pool_size"] = [](auto& c, auto& k, auto& v) { c.pool_size = static_cast<int>(to_long(k, v)); };
    t["environment.state_scaling"] = [](auto& c, auto& k, auto& v) {
      if (v == "none") c.state_scaling = env::StateScaling::none;
      else if (v == "standardize") c.state_scaling = env::StateScaling::standardize;
      else throw ConfigError(fmt::format("{}: expected none or standardize", k));
    };
    t["environment.standardizer_episodes"] = [](auto& c, auto& k, auto& v) {
      c.standardizer_episodes = static_cast<int>(to_long(k, v));
    };

    t["scenario.kind"] = [](auto& c, auto&, auto& v) { c.kind = parse_scenario_kind(v); };
    t["scenario.sigma_j_deg"] = [](auto& c, auto& k, auto& v) { c.sigma_j_deg = to_doubles(k, v); };
    t["scenario.rho"] = [](auto& c, auto& k, auto& v) { c.rho = to_doubles(k, v); };
    t["scenario.levels"] = [](auto& c, auto&, auto& v) { c.levels = split_list(v); };

    t["agent.learning_rate"] = [](auto& c, auto& k, auto& v) { c.agent.learning_rate = to_double(k, v); };
    t["agent.batch_size"] = [](auto& c, auto& k, auto& v) { c.agent.batch_size = static_cast<int>(to_long(k, v)); };
    t["agent.gamma"] = [](auto& c, auto& k, auto& v) { c.agent.gamma = to_double(k, v); };
    t["agent.policy_delay"] = [](auto& c, auto& k, auto& v) {
      c.agent.policy_delay = static_cast<int>(to_long(k, v));
    };
    t["agent.noise_beamformer"] = [](auto& c, auto& k, auto& v) { c.agent.noise_beamformer = to_double(k, v); };
    t["agent.noise_ris"] = [](auto& c, auto& k, auto& v) { c.agent.noise_ris = to_double(k, v); };
    t["agent.buffer_capacity"] = [](auto& c, auto& k, auto& v) {
      c.agent.buffer_capacity = static_cast<int>(to_long(k, v));
    };
    t["agent.hidden"] = [](auto& c, auto& k, auto& v) { c.agent.hidden = static_cast<int>(to_long(k, v)); };
    t["agent.actor_critic_source"] = [](auto& c, auto& k, auto& v) {
      if (v == "q1") c.agent.actor_source = drl::ActorCriticSource::q1;
      else if (v == "min") c.agent.actor_source = drl::ActorCriticSource::min;
      else throw ConfigError(fmt::format("{}: expected q1 or min", k));
    };

    t["baselines.a_max"] = [](auto& c, auto& k, auto& v) { c.ao.a_max = static_cast<int>(to_long(k, v)); };
    t["baselines.w_in"] = [](auto& c, auto& k, auto& v) { c.ao.w_in = static_cast<int>(to_long(k, v)); };
    t["baselines.n_bisect"] = [](auto& c, auto& k, auto& v) { c.ao.n_bisect = static_cast<int>(to_long(k, v)); };
    t["baselines.s_saa"] = [](auto& c, auto& k, auto& v) { c.ao.s_saa = static_cast<int>(to_long(k, v)); };
    t["baselines.tolerance"] = [](auto& c, auto& k, auto& v) { c.ao.tolerance = to_double(k, v); };
    t["baselines.early_exit"] = [](auto& c, auto& k, auto& v) { c.ao.early_exit = to_bool(k, v); };

    t["run.algorithms"] = [](auto& c, auto&, auto& v) { c.algorithms = split_list(v); };
    t["run.seeds"] = [](auto& c, auto& k, auto& v) { c.seeds = to_seeds(k, v); };
    t["run.train_steps"] = [](auto& c, auto& k, auto& v) { c.train_steps = to_long(k, v); };
    t["run.eval_episodes"] = [](auto& c, auto& k, auto& v) { c.eval_episodes = to_long(k, v); };
    t["run.eval_seed"] = [](auto& c, auto& k, auto& v) { c.eval_seed = to_u64(k, v); };
    t["run.experiment_seed"] = [](auto& c, auto& k, auto& v) { c.experiment_seed = to_u64(k, v); };
    t["run.output_dir"] = [](auto& c, auto&, auto& v) { c.output_dir = v; };
    t["run.latency_decisions"] = [](auto& c, auto& k, auto& v) {
      c.latency_decisions = static_cast<int>(to_long(k, v));
    };
    t["run.latency_warmup"] = [](auto& c, auto& k, auto& v) { c.latency_warmup = static_cast<int>(to_long(k, v)); };
    t["run.latency_train_steps"] = [](auto& c, auto& k, auto& v) { c.latency_train_steps = to_long(k, v); };
    return t;
  }();
  return table;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
  it->second(cfg, key, trim(value));
}

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::ideal: return "ideal";
    case ScenarioKind::jitter: return "jitter";
    case ScenarioKind::csi: return "csi";
    case ScenarioKind::combined: return "combined";
    case ScenarioKind::sweep: return "sweep";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  for (auto k : {ScenarioKind::ideal, ScenarioKind::jitter, ScenarioKind::csi, ScenarioKind::combined,
                 ScenarioKind::sweep})
    if (to_string(k) == s) return k;
  throw ConfigError(fmt::format("unknown scenario kind '{}'", s));
}

const std::vector<CombinedLevel>& combined_levels() {
  static const std::vector<CombinedLevel> levels{
      {"L0", 1.0, 0.0}, {"L1", 0.9, 3.0}, {"L2", 0.8, 5.0}, {"L3", 0.6, 7.0}, {"L4", 0.5, 10.0}};
  return levels;
}

bool is_learned(const std::string& a) { return a == "td3" || a == "ddpg" || a == "td3_bf" || a == "ddpg_bf"; }

bool is_beamformer_only(const std::string& a) { return a == "td3_bf" || a == "ddpg_bf"; }

void validate_algorithm(const std::string& a) {
  if (is_learned(a) || a == "ao_wmmse" || a == "ao_wmmse_saa" || a == "random") return;
  throw ConfigError(fmt::format("unknown algorithm '{}'", a));
}

std::vector<ScenarioPoint> ExperimentConfig::points() const {
  std::vector<ScenarioPoint> out;
  auto jitter = [&] {
    for (double d : sigma_j_deg)
      out.push_back({fmt::format("jitter_{:g}deg", d), "jitter", d, deg_to_rad(d), 1.0});
  };
  auto csi = [&] {
    for (double r : rho) out.push_back({fmt::format("csi_rho{:g}", r), "csi", 0.0, 0.0, r});
  };
  auto combined = [&] {
    for (const auto& name : levels) {
      const auto& all = combined_levels();
      auto it = std::find_if(all.begin(), all.end(), [&](const CombinedLevel& l) { return l.name == name; });
      if (it == all.end()) throw ConfigError(fmt::format("unknown combined level '{}'", name));
      out.push_back({fmt::format("combined_{}", it->name), "combined", it->sigma_j_deg, deg_to_rad(it->sigma_j_deg),
                     it->rho});
    }
  };
  switch (kind) {
    case ScenarioKind::ideal: out.push_back({"ideal", "ideal", 0.0, 0.0, 1.0}); break;
    case ScenarioKind::jitter: jitter(); break;
    case ScenarioKind::csi: csi(); break;
    case ScenarioKind::combined: combined(); break;
    case ScenarioKind::sweep:
      jitter();
      csi();
      combined();
      break;
  }
  return out;
}

void ExperimentConfig::apply_paper_scale() {
  train_steps = 200000;
  seeds.clear();
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  eval_episodes = 2000;
}

void ExperimentConfig::validate() const {
  system.validate();
  agent.validate();
  ao.validate();
  if (samples < 1) throw ConfigError("environment.samples must be >= 1");
  if (pool_size < system.K) throw ConfigError("environment.pool_size must be >= K");
  if (algorithms.empty()) throw ConfigError("run.algorithms is empty");
  for (const auto& a : algorithms) validate_algorithm(a);
  if (seeds.empty()) throw ConfigError("run.seeds is empty");
  if (train_steps < 1 || eval_episodes < 1) throw ConfigError("train_steps and eval_episodes must be >= 1");
  if (latency_decisions < 1 || latency_warmup < 0) throw ConfigError("invalid latency sample counts");
  for (double d : sigma_j_deg)
    if (!(d >= 0.0)) throw ConfigError("scenario.sigma_j_deg entries must be non-negative");
  for (double r : rho)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("scenario.rho entries must lie in [0, 1]");
  const auto pts = points();
  if (pts.empty()) throw ConfigError("scenario grid is empty");
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (pts[i].name == pts[j].name) throw ConfigError(fmt::format("duplicate scenario point '{}'", pts[i].name));
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config parse error at line {}: {}", e.line(), e.message()));
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(fmt::format("key '{}' outside any section", section));
    for (const auto& [key, value] : body) set_key(cfg, section + "." + key, value.get_value<std::string>());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string training_signature(const ExperimentConfig& cfg, const ScenarioPoint& point,
                               const std::string& algorithm) {
  const auto& s = cfg.system;
  const auto& a = cfg.agent;
  return fmt::format(
      "alg={};M={};N={};K={};fc={:.17g};pbs={:.17g},{:.17g},{:.17g};quav={:.17g},{:.17g},{:.17g};P={:.17g};"
      "noise={:.17g};atg={:.17g},{:.17g};alpha={:.17g},{:.17g};eta={:.17g};kappa={:.17g},{:.17g};"
      "rician={:.17g},{:.17g};sigma_j={:.17g};rho={:.17g};S={};scaling={};lr={:.17g};B={};delay={};"
      "noise_bf={:.17g};noise_ris={:.17g};buffer={};hidden={};source={};steps={};pool={};exp_seed={}",
      algorithm, s.M, s.N, s.K, s.carrier_hz, s.p_bs.x(), s.p_bs.y(), s.p_bs.z(), s.q_uav.x(), s.q_uav.y(),
      s.q_uav.z(), s.p_max, s.noise_dbw, s.atg_a, s.atg_b, s.alpha1, s.alpha2, s.eta_nlos, s.kappa1, s.kappa2,
      s.rician_k1, s.rician_k2, point.sigma_j, point.rho, cfg.samples,
      cfg.state_scaling == env::StateScaling::none ? "none" : "standardize", a.learning_rate, a.batch_size,
      a.policy_delay, a.noise_beamformer, a.noise_ris, a.buffer_capacity, a.hidden,
      a.actor_source == drl::ActorCriticSource::q1 ? "q1" : "min", cfg.train_steps, cfg.pool_size,
      cfg.experiment_seed);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace uavris::harness
