#include "uavris/environment.hpp"

#include <atomic>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace uavris::env {

void UncertaintyConfig::validate() const {
  if (samples < 1) throw ConfigError("Monte Carlo sample count S must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError(fmt::format("rho = {} outside [0, 1]", rho));
  if (!(sigma_j >= 0.0)) throw ConfigError("sigma_j must be non-negative");
}

EpisodePool make_user_pool(int size, Rng& rng, const PoolRegion& region) {
  if (size < 1) throw ConfigError("user pool must hold at least one candidate");
  std::uniform_real_distribution<double> ux(region.x_min, region.x_max);
  std::uniform_real_distribution<double> uy(region.y_min, region.y_max);
  EpisodePool pool;
  pool.candidates.resize(size, 3);
  for (int i = 0; i < size; ++i) {
    pool.candidates(i, 0) = ux(rng);
    pool.candidates(i, 1) = uy(rng);
    pool.candidates(i, 2) = 0.0;
  }
  return pool;
}

RMatrix sample_users(const EpisodePool& pool, int K, Rng& rng) {
  if (pool.size() < K)
    throw ConfigError(fmt::format("user pool has {} candidates, need K = {}", pool.size(), K));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  RMatrix users(K, 3);
  for (int k = 0; k < K; ++k) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(k)], idx[pick(rng)]);
    users.row(k) = pool.candidates.row(idx[static_cast<std::size_t>(k)]);
  }
  return users;
}

DecodedAction ActionLayout::decode(const RVector& raw) const {
  if (raw.size() != dim())
    throw DimensionError(fmt::format("action has length {}, expected {}", raw.size(), dim()));
  const int mk = M * K;
  DecodedAction out;
  out.G_raw.resize(M, K);
  for (int i = 0; i < mk; ++i) out.G_raw(i % M, i / M) = cplx(raw(i), raw(mk + i));
  out.phi_raw.resize(N, 2);
  for (int n = 0; n < N; ++n) {
    out.phi_raw(n, 0) = raw(2 * mk + n);
    out.phi_raw(n, 1) = raw(2 * mk + N + n);
  }
  return out;
}

RVector ActionLayout::encode(const CMatrix& G, const RMatrix& phi_pairs) const {
  const int mk = M * K;
  RVector raw(dim());
  for (int i = 0; i < mk; ++i) {
    raw(i) = G(i % M, i / M).real();
    raw(mk + i) = G(i % M, i / M).imag();
  }
  for (int n = 0; n < N; ++n) {
    raw(2 * mk + n) = phi_pairs(n, 0);
    raw(2 * mk + N + n) = phi_pairs(n, 1);
  }
  return raw;
}

namespace {

CMatrix project_power(const CMatrix& G_raw, double p_max) {
  const double norm = G_raw.norm();
  const double limit = std::sqrt(p_max);
  if (norm <= limit) return G_raw;
  return G_raw * (limit / norm);
}

/// Pulls back a gradient through x -> x min(1, r / |x|).
void power_vjp(const double* x, const double* g, double* out, int n, double p_max) {
  double sq = 0.0, dot = 0.0;
  for (int i = 0; i < n; ++i) {
    sq += x[i] * x[i];
    dot += x[i] * g[i];
  }
  const double norm = std::sqrt(sq);
  const double limit = std::sqrt(p_max);
  if (norm <= limit) {
    std::copy(g, g + n, out);
    return;
  }
  const double scale = limit / norm;
  for (int i = 0; i < n; ++i) out[i] = scale * (g[i] - x[i] * dot / sq);
}

}  // namespace

FeasibleAction safety_project(const CMatrix& G_raw, const RMatrix& phi_raw, double p_max) {
  FeasibleAction out;
  out.G = project_power(G_raw, p_max);
  out.phi.resize(phi_raw.rows());
  for (Eigen::Index n = 0; n < phi_raw.rows(); ++n) {
    const double re = phi_raw(n, 0), im = phi_raw(n, 1);
    const double r = std::hypot(re, im);
    if (r < kPhaseFallbackNorm) {
      out.phi(n) = cplx(1.0, 0.0);
      ++out.fallback_rows;
    } else {
      out.phi(n) = cplx(re / r, im / r);
    }
  }
  return out;
}

ActionMapper::ActionMapper(int M, int N, int K, double p_max, std::optional<CVector> fixed_phi)
    : layout_{M, N, K}, p_max_(p_max), fixed_phi_(std::move(fixed_phi)) {
  if (fixed_phi_ && fixed_phi_->size() != N) throw DimensionError("fixed RIS phases must have N entries");
}

int ActionMapper::raw_dim() const { return fixed_phi_ ? layout_.beamformer_dim() : layout_.dim(); }

FeasibleAction ActionMapper::project(const RVector& raw) const {
  if (raw.size() != raw_dim())
    throw DimensionError(fmt::format("action has length {}, expected {}", raw.size(), raw_dim()));
  if (!fixed_phi_) {
    const DecodedAction d = layout_.decode(raw);
    return safety_project(d.G_raw, d.phi_raw, p_max_);
  }
  const int M = layout_.M, K = layout_.K, mk = M * K;
  CMatrix G_raw(M, K);
  for (int i = 0; i < mk; ++i) G_raw(i % M, i / M) = cplx(raw(i), raw(mk + i));
  FeasibleAction out;
  out.G = project_power(G_raw, p_max_);
  out.phi = *fixed_phi_;
  return out;
}

RVector ActionMapper::features(const FeasibleAction& action) const {
  const int M = layout_.M, N = layout_.N, mk = M * layout_.K;
  RVector f(raw_dim());
  for (int i = 0; i < mk; ++i) {
    f(i) = action.G(i % M, i / M).real();
    f(mk + i) = action.G(i % M, i / M).imag();
  }
  if (!fixed_phi_) {
    for (int n = 0; n < N; ++n) {
      f(2 * mk + n) = action.phi(n).real();
      f(2 * mk + N + n) = action.phi(n).imag();
    }
  }
  return f;
}

RVector ActionMapper::vjp(const RVector& raw, const RVector& grad_features) const {
  if (raw.size() != raw_dim() || grad_features.size() != raw_dim())
    throw DimensionError("vjp: dimension mismatch");
  RVector out(raw_dim());
  const int bf = layout_.beamformer_dim();
  power_vjp(raw.data(), grad_features.data(), out.data(), bf, p_max_);
  if (fixed_phi_) return out;
  const int N = layout_.N;
  for (int n = 0; n < N; ++n) {
    const int ia = bf + n, ib = bf + N + n;
    const double a = raw(ia), b = raw(ib);
    const double r2 = a * a + b * b;
    const double r = std::sqrt(r2);
    if (r < kPhaseFallbackNorm) {
      out(ia) = 0.0;
      out(ib) = 0.0;
      continue;
    }
    // d(p / |p|) = (I - p p^T / |p|^2) / |p|
    const double ga = grad_features(ia), gb = grad_features(ib);
    const double dot = (a * ga + b * gb) / r2;
    out(ia) = (ga - a * dot) / r;
    out(ib) = (gb - b * dot) / r;
  }
  return out;
}

namespace {
std::atomic<std::uint64_t> g_reward_calls{0};
}

std::uint64_t reward_evaluation_count() { return g_reward_calls.load(std::memory_order_relaxed); }

RewardResult monte_carlo_reward(const channel::Downlink& downlink, const channel::ChannelContext& ctx,
                                const CMatrix& G, const CVector& phi, const UncertaintyConfig& ucfg,
                                Rng& jitter_rng, Rng& csi_rng) {
  g_reward_calls.fetch_add(1, std::memory_order_relaxed);
  RewardResult out;
  out.per_sample.reserve(static_cast<std::size_t>(ucfg.samples));
  const double sigma_n2 = downlink.cfg.sigma_n2();
  double total = 0.0;
  for (int i = 0; i < ucfg.samples; ++i) {
    const auto truth = channel::sample_true_cascaded(downlink, ctx, ucfg.sigma_j, ucfg.rho, jitter_rng, csi_rng);
    const double t = channel::throughput(channel::effective_channel(truth, phi), G, sigma_n2);
    out.per_sample.push_back(t);
    total += t;
  }
  out.reward = total / ucfg.samples;
  return out;
}

Environment::Environment(const channel::SystemConfig& cfg, const UncertaintyConfig& ucfg, EpisodePool pool,
                         std::optional<CVector> fixed_phi)
    : downlink_(cfg),
      ucfg_(ucfg),
      pool_(std::move(pool)),
      mapper_(cfg.M, cfg.N, cfg.K, cfg.p_max, std::move(fixed_phi)) {
  ucfg_.validate();
  if (pool_.size() < cfg.K)
    throw ConfigError(fmt::format("user pool has {} candidates, need K = {}", pool_.size(), cfg.K));
}

int Environment::state_dim() const {
  const auto& c = downlink_.cfg;
  return c.K + 2 * c.N * c.M + 2 * c.N * c.K;
}

Episode Environment::reset(Rng& placement_rng, Rng& nlos_rng) const {
  const RMatrix users = sample_users(pool_, downlink_.cfg.K, placement_rng);
  Episode ep;
  ep.ctx = channel::sample_channels(downlink_.cfg, downlink_.geometry, downlink_.link, users, nlos_rng);
  ep.state = encode_state(ep.ctx);
  return ep;
}

RVector Environment::raw_state(const channel::ChannelContext& ctx) const {
  const auto& c = downlink_.cfg;
  const Eigen::Index nm = c.N * c.M, nk = c.N * c.K;
  RVector s(state_dim());
  s.head(c.K) = ctx.d2;
  Eigen::Index off = c.K;
  // Eigen storage is column-major, so reshaped() flattens column by column.
  s.segment(off, nm) = ctx.H1_est.real().reshaped();
  off += nm;
  s.segment(off, nm) = ctx.H1_est.imag().reshaped();
  off += nm;
  s.segment(off, nk) = ctx.H2_est.real().reshaped();
  off += nk;
  s.segment(off, nk) = ctx.H2_est.imag().reshaped();
  return s;
}

RVector Environment::encode_state(const channel::ChannelContext& ctx) const {
  RVector s = raw_state(ctx);
  if (scaling_ == StateScaling::standardize) s = (s - state_mean_).cwiseProduct(state_inv_std_);
  return s;
}

StepResult Environment::step(const channel::ChannelContext& ctx, const RVector& raw_action, Rng& jitter_rng,
                             Rng& csi_rng) const {
  StepResult out;
  out.action = mapper_.project(raw_action);
  RewardResult r = monte_carlo_reward(downlink_, ctx, out.action.G, out.action.phi, ucfg_, jitter_rng, csi_rng);
  out.reward = r.reward;
  out.per_sample = std::move(r.per_sample);
  return out;
}

void Environment::fit_standardizer(int episodes, Rng& placement_rng, Rng& nlos_rng) {
  if (episodes < 2) throw ConfigError("standardizer needs at least two episodes");
  const int dim = state_dim();
  RVector sum = RVector::Zero(dim), sq = RVector::Zero(dim);
  for (int e = 0; e < episodes; ++e) {
    const RMatrix users = sample_users(pool_, downlink_.cfg.K, placement_rng);
    const auto ctx = channel::sample_channels(downlink_.cfg, downlink_.geometry, downlink_.link, users, nlos_rng);
    const RVector s = raw_state(ctx);
    sum += s;
    sq += s.cwiseAbs2();
  }
  state_mean_ = sum / episodes;
  const RVector var = (sq / episodes - state_mean_.cwiseAbs2()).cwiseMax(0.0);
  state_inv_std_ = var.unaryExpr([](double v) { return v > 1e-300 ? 1.0 / std::sqrt(v) : 1.0; });
  scaling_ = StateScaling::standardize;
}

}  // namespace uavris::env
