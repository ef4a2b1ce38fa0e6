// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//   acceptance [--only 1,2,...] [--work DIR]

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "oracles.hpp"
#include "uavris/baselines.hpp"
#include "uavris/config.hpp"
#include "uavris/experiment.hpp"
#include "uavris/stats.hpp"

using namespace uavris;
using namespace uavris::harness;
namespace fs = std::filesystem;

namespace tol {
constexpr long kFeasibilitySamples = 1'000'000;
constexpr double kPowerSlack = 1e-9;
constexpr double kModulusSlack = 1e-12;
constexpr int kJacobianPoints = 100;
constexpr double kJacobianRel = 1e-4;
constexpr int kActorCoordinates = 20;
constexpr double kActorRel = 1e-3;
constexpr int kRicianDraws = 100000;
constexpr double kStatRel = 0.03;
constexpr int kRotations = 10000;
constexpr double kOrthogonality = 1e-12;
constexpr double kSlopeTarget = -1.0;
constexpr double kSlopeBand = 0.15;
constexpr double kCosine = 1.0 - 1e-6;
constexpr int kMonotoneInstances = 100;
constexpr double kInnerSlack = 1e-9;
constexpr int kSmallContexts = 50;
constexpr int kGridPoints = 64;
constexpr double kOptimalityRatio = 0.99;
constexpr long kTrainSteps = 50000;
constexpr double kRandomMargin = 1.5;
constexpr int kTd3WinsNeeded = 3;
constexpr long kRobustContexts = 200;
constexpr double kPhiGain = 1.2;
constexpr double kLatencyRatio = 50.0;
constexpr int kLatencyDecisions = 1000;
}  // namespace tol

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// algorithm -> seed -> mean from an <prefix>_seeds.csv file
std::map<std::string, std::map<std::string, double>> seed_means(const fs::path& p) {
  std::map<std::string, std::map<std::string, double>> out;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string alg, point, seed, mean;
    std::getline(s, alg, ',');
    std::getline(s, point, ',');
    std::getline(s, seed, ',');
    std::getline(s, mean, ',');
    out[alg][seed] = std::stod(mean);
  }
  return out;
}

double mean_over(const std::map<std::string, double>& by_seed, const std::vector<std::uint64_t>& seeds) {
  double m = 0.0;
  for (auto s : seeds) m += by_seed.at(std::to_string(s));
  return m / static_cast<double>(seeds.size());
}

// ---------------------------------------------------------------------------

Outcome feasibility() {
  const channel::SystemConfig sys;
  const env::ActionMapper mapper(sys.M, sys.N, sys.K, sys.p_max);
  Rng rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0;
  double worst_power = 0.0, worst_modulus = 0.0;
  const int bf = mapper.layout().beamformer_dim();
  for (long i = 0; i < tol::kFeasibilitySamples; ++i) {
    RVector x(mapper.raw_dim());
    const double scale = std::exp(standard_normal(rng) * 4.0);
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = standard_normal(rng) * scale;
    if (i % 100 == 0) x.segment(bf, x.size() - bf).setZero();     // every RIS pair degenerate
    if (i % 100 == 1) x(bf + static_cast<Eigen::Index>(u(rng) * sys.N)) = 0.0;
    if (i % 100 == 2) x.head(bf).setZero();
    const auto a = mapper.project(x);
    const double excess = a.G.squaredNorm() - sys.p_max;
    const double dev = (a.phi.cwiseAbs().array() - 1.0).abs().maxCoeff();
    worst_power = std::max(worst_power, excess);
    worst_modulus = std::max(worst_modulus, dev);
    if (!(excess <= tol::kPowerSlack) || !(dev <= tol::kModulusSlack) || !a.G.allFinite()) ++violations;
  }
  return {violations == 0, fmt::format("{} violations in {} actions; max power excess {:.3e}, max |phi|-1 {:.3e}",
                                       violations, tol::kFeasibilitySamples, worst_power, worst_modulus)};
}

Outcome gradients() {
  const channel::SystemConfig sys;
  const env::ActionMapper mapper(sys.M, sys.N, sys.K, sys.p_max);
  Rng rng(202);
  double worst_jac = 0.0;
  for (int i = 0; i < tol::kJacobianPoints; ++i) {
    const RVector x = oracle::smooth_raw_action(mapper, rng);
    const RMatrix fd = oracle::fd_feature_jacobian(mapper, x, 1e-5);
    const RMatrix an = oracle::vjp_jacobian(mapper, x);
    worst_jac = std::max(worst_jac, (fd - an).norm() / an.norm());
  }

  const ExperimentConfig cfg;
  const auto point = cfg.points().front();
  const env::Environment e = make_environment(cfg, point, "td3");
  Rng init(7), p(8), n(9);
  drl::Agent agent(agent_config(cfg, "td3"), e.mapper(), e.state_dim(), init);
  RMatrix states(e.state_dim(), 8);
  for (int i = 0; i < 8; ++i) states.col(i) = e.reset(p, n).state;
  const auto check = oracle::actor_gradient_check(agent, states, tol::kActorCoordinates, rng);

  const bool pass = worst_jac < tol::kJacobianRel && check.coordinates == tol::kActorCoordinates &&
                    check.max_relative_error < tol::kActorRel;
  return {pass, fmt::format("Jacobian max rel err {:.2e} over {} points; actor gradient max rel err {:.2e} over {} "
                            "coordinates",
                            worst_jac, tol::kJacobianPoints, check.max_relative_error, check.coordinates)};
}

Outcome channel_statistics() {
  const channel::SystemConfig sys;
  Rng rng(303);
  std::vector<std::string> parts;
  bool pass = true;

  for (double k : {sys.rician_k1, sys.rician_k2}) {
    CMatrix los(1, 1);
    los(0, 0) = std::polar(1.0, 1.1);
    const double beta = 3e-7;
    double power = 0.0;
    cplx mean = 0.0;
    for (int i = 0; i < tol::kRicianDraws; ++i) {
      CMatrix nlos(1, 1);
      nlos(0, 0) = complex_normal(rng);
      const cplx h = channel::rician_mix(beta, k, los, nlos)(0, 0);
      power += std::norm(h);
      mean += h;
    }
    power /= tol::kRicianDraws;
    mean /= static_cast<double>(tol::kRicianDraws);
    const double frac = std::norm(mean) / power;
    const double err = std::abs(frac / (k / (k + 1.0)) - 1.0);
    pass = pass && err <= tol::kStatRel && std::abs(power / beta - 1.0) <= tol::kStatRel;
    parts.push_back(fmt::format("LoS fraction k={:g}: {:.4f} vs {:.4f}", k, frac, k / (k + 1.0)));
  }

  const CMatrix H = complex_normal_matrix(sys.N, sys.M, rng, 1e-8);
  const double rho = 0.6, s2 = 4e-9;
  double total = 0.0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) total += channel::corrupt_csi(H, rho, s2, rng).squaredNorm();
  const double expected = rho * rho * H.squaredNorm() + (1.0 - rho * rho) * sys.N * sys.M * s2;
  const double csi_err = std::abs(total / reps / expected - 1.0);
  pass = pass && csi_err <= tol::kStatRel;
  parts.push_back(fmt::format("CSI power rel err {:.4f}", csi_err));

  double worst = 0.0;
  for (int i = 0; i < tol::kRotations; ++i) {
    const auto j = channel::sample_jitter(deg_to_rad(10.0), rng);
    worst = std::max(worst, (j.R * j.R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  pass = pass && worst <= tol::kOrthogonality;
  parts.push_back(fmt::format("max |R R^T - I| {:.2e}", worst));

  std::string detail;
  for (const auto& s : parts) detail += (detail.empty() ? "" : "; ") + s;
  return {pass, detail};
}

Outcome monte_carlo() {
  const ExperimentConfig cfg;
  const auto ideal = cfg.points().front();
  Rng rng(404);

  // collapse: S = 1 without uncertainty is the plain throughput
  const channel::Downlink dl(cfg.system);
  const env::UncertaintyConfig none{0.0, 1.0, 1};
  ExperimentConfig c1 = cfg;
  c1.samples = 1;
  const env::Environment e = make_environment(c1, ideal, "td3");
  Rng p(1), n(2);
  bool exact = true;
  for (int i = 0; i < 20; ++i) {
    const auto ep = e.reset(p, n);
    RVector raw(e.action_dim());
    for (Eigen::Index j = 0; j < raw.size(); ++j) raw(j) = standard_normal(rng);
    const auto a = e.mapper().project(raw);
    Rng j(i), c(i + 1);
    const double r = env::monte_carlo_reward(dl, ep.ctx, a.G, a.phi, none, j, c).reward;
    const CMatrix H = channel::effective_channel(channel::cascaded_all(ep.ctx.H2_est, ep.ctx.H1_est), a.phi);
    exact = exact && r == channel::throughput(H, a.G, cfg.system.sigma_n2());
  }

  const env::UncertaintyConfig base{deg_to_rad(8.0), 0.6, 1};
  const auto ep = e.reset(p, n);
  RVector raw(e.action_dim());
  for (Eigen::Index j = 0; j < raw.size(); ++j) raw(j) = standard_normal(rng);
  const auto a = e.mapper().project(raw);
  std::vector<double> log_s, log_v;
  Rng j(7), c(8);
  for (int S : {1, 4, 16, 64}) {
    env::UncertaintyConfig u = base;
    u.samples = S;
    std::vector<double> r;
    for (int rep = 0; rep < 400; ++rep) r.push_back(env::monte_carlo_reward(dl, ep.ctx, a.G, a.phi, u, j, c).reward);
    const Summary s = summarize(r);
    log_s.push_back(std::log(static_cast<double>(S)));
    log_v.push_back(std::log(s.stddev * s.stddev));
  }
  const double slope = ols_slope(log_s, log_v);
  const bool pass = exact && std::abs(slope - tol::kSlopeTarget) <= tol::kSlopeBand;
  return {pass, fmt::format("variance slope {:.3f}; S-collapse exact: {}", slope, exact ? "yes" : "no")};
}

Outcome wmmse() {
  const ExperimentConfig cfg;
  const baselines::AoConfig ao;
  Rng rng(505);
  double worst_cos = 1.0;
  for (int t = 0; t < 20; ++t) {
    const CMatrix h = complex_normal_matrix(1, cfg.system.M, rng);
    const auto r = baselines::wmmse_precoder(h, cfg.system.p_max, 0.05 * (t + 1), ao);
    const CVector closed = h.adjoint() / h.norm();
    worst_cos = std::min(worst_cos, std::abs(closed.dot(r.G.col(0))) / r.G.norm());
  }

  const env::Environment e = make_environment(cfg, cfg.points().front(), "ao_wmmse");
  const double s2 = cfg.system.sigma_n2();
  int inner_drops = 0, outer_drops = 0;
  for (int t = 0; t < tol::kMonotoneInstances; ++t) {
    Rng p(rng()), n(rng());
    const auto ep = e.reset(p, n);
    const CVector phi = baselines::fixed_random_phases(cfg.system.N, rng);
    const CMatrix H = channel::effective_channel(ep.ctx.H2_est, phi, ep.ctx.H1_est);
    const auto w = baselines::wmmse_precoder(H, cfg.system.p_max, s2, ao);
    for (std::size_t i = 1; i < w.trace.size(); ++i)
      if (w.trace[i] < w.trace[i - 1] - tol::kInnerSlack) ++inner_drops;
    const auto r = baselines::ao_wmmse(e.downlink(), ep.ctx, ao);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      if (r.trace[i] < r.trace[i - 1]) ++outer_drops;
  }
  const bool pass = worst_cos >= tol::kCosine && inner_drops == 0 && outer_drops == 0;
  return {pass, fmt::format("min cosine {:.12f}; inner decreases {}; outer decreases {} ({} instances)", worst_cos,
                            inner_drops, outer_drops, tol::kMonotoneInstances)};
}

Outcome small_instance() {
  channel::SystemConfig sys;
  sys.M = 2;
  sys.N = 4;
  sys.K = 1;
  Rng pool_rng(9);
  const env::Environment e(sys, {}, env::make_user_pool(40, pool_rng));
  Rng p(606), n(607);
  double worst = 1e300;
  int below = 0;
  for (int t = 0; t < tol::kSmallContexts; ++t) {
    const auto sc = oracle::two_element_instance(e, p, n);
    const auto r = baselines::ao_core(std::vector<baselines::Scenario>{sc}, sys.p_max, sys.sigma_n2(), {});
    const double grid = oracle::single_user_grid_rate(sc, sys.p_max, sys.sigma_n2(), tol::kGridPoints);
    const double ratio = r.trace.back() / grid;
    worst = std::min(worst, ratio);
    if (ratio < tol::kOptimalityRatio) ++below;
  }
  return {below == 0, fmt::format("worst AO / grid ratio {:.5f} over {} contexts", worst, tol::kSmallContexts)};
}

// -- learned agents ----------------------------------------------------------

ExperimentConfig ideal_config() {
  ExperimentConfig c;
  c.train_steps = tol::kTrainSteps;
  c.output_dir = (g_work / "ideal").string();
  return c;
}

/// TD3 and DDPG at the ideal point, 5 seeds, plus the random policy.
const fs::path& ideal_runs() {
  static const fs::path dir = [] {
    ExperimentConfig c = ideal_config();
    c.algorithms = {"td3", "ddpg", "random"};
    std::ostringstream log;
    run_training(c, log);
    run_evaluation(c, log);
    std::cout << log.str() << std::flush;
    return fs::path(c.output_dir);
  }();
  return dir;
}

Outcome learning_signal() {
  const auto means = seed_means(ideal_runs() / "eval_seeds.csv");
  const ExperimentConfig c = ideal_config();
  const double random = means.at("random").at("-");
  const double td3 = mean_over(means.at("td3"), c.seeds), ddpg = mean_over(means.at("ddpg"), c.seeds);
  int wins = 0;
  std::string per_seed;
  for (auto s : c.seeds) {
    const double a = means.at("td3").at(std::to_string(s)), b = means.at("ddpg").at(std::to_string(s));
    if (a >= b) ++wins;
    per_seed += fmt::format(" s{}:{:.2f}/{:.2f}", s, a, b);
  }
  const bool pass = td3 >= tol::kRandomMargin * random && ddpg >= tol::kRandomMargin * random &&
                    wins >= tol::kTd3WinsNeeded;
  return {pass, fmt::format("random {:.3f}, TD3 {:.3f} ({:.2f}x), DDPG {:.3f} ({:.2f}x); TD3 >= DDPG on {}/{} seeds "
                            "[td3/ddpg{}]",
                            random, td3, td3 / random, ddpg, ddpg / random, wins, c.seeds.size(), per_seed)};
}

Outcome robustness() {
  ExperimentConfig c;
  c.kind = ScenarioKind::sweep;
  c.sigma_j_deg = {0, 10};
  c.rho = {1.0, 0.5};
  c.levels = {"L0", "L4"};
  c.algorithms = {"td3", "ao_wmmse", "ao_wmmse_saa"};
  c.seeds = {1, 2, 3};
  c.train_steps = tol::kTrainSteps;
  c.eval_episodes = tol::kRobustContexts;
  c.output_dir = (g_work / "robustness").string();
  std::ostringstream log;
  const auto rows = run_sweep(c, log);
  std::cout << log.str() << std::flush;

  std::map<std::string, std::map<std::string, double>> rel;  // axis -> algorithm -> degradation
  for (const auto& r : rows) rel[r.axis][r.algorithm] = r.relative;
  bool pass = true;
  std::string detail;
  for (const std::string axis : {"jitter", "csi", "combined"}) {
    const auto& d = rel.at(axis);
    const bool ok = d.at("ao_wmmse") > d.at("ao_wmmse_saa") && d.at("ao_wmmse") > d.at("td3");
    pass = pass && ok;
    detail += fmt::format("{}{}: AO {:.1f}%, SAA {:.1f}%, TD3 {:.1f}% ({})", detail.empty() ? "" : "; ", axis,
                          100 * d.at("ao_wmmse"), 100 * d.at("ao_wmmse_saa"), 100 * d.at("td3"),
                          ok ? "ordered" : "not ordered");
  }
  return {pass, detail};
}

Outcome ablation() {
  ExperimentConfig c = ideal_config();
  c.algorithms = {"td3_bf", "ddpg_bf"};
  c.seeds = {1, 2, 3};
  c.output_dir = (g_work / "ablation").string();
  std::ostringstream log;
  run_training(c, log);
  run_evaluation(c, log);
  std::cout << log.str() << std::flush;
  const auto bf = seed_means(fs::path(c.output_dir) / "eval_seeds.csv");
  const auto full = seed_means(ideal_runs() / "eval_seeds.csv");
  bool pass = true;
  std::string detail;
  for (const std::string alg : {"td3", "ddpg"}) {
    const double with_phi = mean_over(full.at(alg), c.seeds);
    const double fixed = mean_over(bf.at(alg + "_bf"), c.seeds);
    const double gain = with_phi / fixed;
    pass = pass && gain >= tol::kPhiGain;
    detail += fmt::format("{}{}: {:.3f} vs fixed-phase {:.3f} (+{:.1f}%)", detail.empty() ? "" : "; ", alg, with_phi,
                          fixed, 100 * (gain - 1.0));
  }
  return {pass, detail};
}

Outcome latency() {
  ExperimentConfig c = ideal_config();
  c.algorithms = {"td3", "ddpg"};
  c.latency_decisions = tol::kLatencyDecisions;
  c.output_dir = ideal_runs().string();
  std::ostringstream log;
  const auto rep = run_latency(c, log);
  std::map<std::string, double> ms;
  for (const auto& e : rep.entries) ms[e.algorithm] = e.median_ms;
  const double ao = ms.at("ao_wmmse"), saa = ms.at("ao_wmmse_saa");
  const double drl = std::max(ms.at("td3"), ms.at("ddpg"));
  const bool pass = ao / drl >= tol::kLatencyRatio && saa > ao && rep.reward_evaluations_in_timed_regions == 0 &&
                    rep.trained_weights;
  return {pass, fmt::format("TD3 {:.4f} ms, DDPG {:.4f} ms, AO {:.3f} ms, SAA {:.3f} ms; AO/DRL {:.0f}x; training "
                            "{:.0f} steps/s",
                            ms.at("td3"), ms.at("ddpg"), ao, saa, ao / drl, rep.training_steps_per_second)};
}

Outcome determinism() {
  auto run = [](const std::string& tag) {
    ExperimentConfig c;
    c.kind = ScenarioKind::jitter;
    c.sigma_j_deg = {0, 6};
    c.algorithms = {"td3", "ddpg_bf", "ao_wmmse_saa", "random"};
    c.seeds = {1, 2};
    c.train_steps = 1500;
    c.eval_episodes = 40;
    c.output_dir = (g_work / tag).string();
    fs::remove_all(c.output_dir);
    std::ostringstream log;
    run_sweep(c, log);
    return fs::path(c.output_dir);
  };
  const fs::path a = run("rerun_a"), b = run("rerun_b");
  int files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".ckpt") continue;
    const fs::path other = b / fs::relative(entry.path(), a);
    ++files;
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
  }
  return {files > 0 && differing == 0,
          fmt::format("{} CSV/checkpoint files compared, {} differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work = "acceptance_runs";
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--work", work, "directory for experiment artifacts");
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"feasibility totality", feasibility},
      {"gradient fidelity", gradients},
      {"channel statistics", channel_statistics},
      {"Monte Carlo reward", monte_carlo},
      {"WMMSE correctness", wmmse},
      {"small-instance optimality", small_instance},
      {"learning signal", learning_signal},
      {"robustness ordering", robustness},
      {"BF-only ablation", ablation},
      {"latency ratio", latency},
      {"determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::vector<std::string> summary;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string line =
        fmt::format("criterion {:>2} {} {}: {} [{:.0f} s]", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail,
                    secs);
    std::cout << line << std::endl;
    summary.push_back(line);
    if (!o.pass) ++failed;
  }
  std::cout << "\n";
  for (const auto& l : summary) std::cout << l << "\n";
  return failed == 0 ? 0 : 1;
}
