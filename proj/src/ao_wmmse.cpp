#include <cmath>
#include <iostream>
#include <mutex>

#include <fmt/core.h>

#include "uavris/baselines.hpp"

namespace uavris::baselines {

namespace {

std::vector<CMatrix> effective_channels(std::span<const Scenario> scenarios, const CVector& phi) {
  std::vector<CMatrix> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(channel::effective_channel(s, phi));
  return out;
}

}  // namespace

double mean_throughput(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi, double sigma_n2) {
  double total = 0.0;
  for (const auto& s : scenarios) total += channel::throughput(channel::effective_channel(s, phi), G, sigma_n2);
  return total / static_cast<double>(scenarios.size());
}

RisSurrogate ris_surrogate(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi,
                           double sigma_n2) {
  const Eigen::Index N = phi.size(), K = G.cols();
  RisSurrogate s{CMatrix::Zero(N, N), CVector::Zero(N)};
  const double inv_s = 1.0 / static_cast<double>(scenarios.size());
  for (const auto& cascade : scenarios) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const CMatrix& C = cascade[static_cast<std::size_t>(k)];
      const CMatrix a = C * G;  // column j: a_kj, with h_k^H g_j = phi^T a_kj
      const CVector inner = a.transpose() * phi;
      const double total = inner.squaredNorm() + sigma_n2;
      const cplx u = inner(k) / total;
      const double w = total / (total - std::norm(inner(k)));
      // |phi^T a|^2 = phi^H conj(a) a^T phi
      const CMatrix ac = a.conjugate();
      s.Q.noalias() += (inv_s * w * std::norm(u)) * (ac * ac.adjoint());
      s.q += (inv_s * w) * u * ac.col(k);
    }
  }
  s.Q = 0.5 * (s.Q + s.Q.adjoint()).eval();
  return s;
}

bool ris_phase_candidate(const RisSurrogate& s, CVector& phi_out) {
  const Eigen::Index N = s.q.size();
  // minimise x^H [Q -q; -q^H 0] x over |x_n| = 1 with x = [phi; t]
  CMatrix Mh = CMatrix::Zero(N + 1, N + 1);
  Mh.topLeftCorner(N, N) = s.Q;
  Mh.topRightCorner(N, 1) = -s.q;
  Mh.bottomLeftCorner(1, N) = -s.q.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(Mh);
  if (eig.info() != Eigen::Success) return false;
  // lowest eigenvector of Mh == dominant eigenvector of lambda_max I - Mh
  const CVector x = eig.eigenvectors().col(0);
  const cplx t = x(N);
  const cplx rot = std::abs(t) > 0.0 ? std::conj(t) / std::abs(t) : cplx(1.0, 0.0);
  phi_out.resize(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const cplx v = x(n) * rot;
    const double r = std::abs(v);
    phi_out(n) = r > 0.0 ? v / r : cplx(1.0, 0.0);
  }
  return true;
}

RisUpdate ris_phase_update(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi,
                           double sigma_n2) {
  RisUpdate out;
  out.phi = phi;
  out.throughput_before = mean_throughput(scenarios, G, phi, sigma_n2);
  out.throughput_after = out.throughput_before;
  CVector candidate;
  if (!ris_phase_candidate(ris_surrogate(scenarios, G, phi, sigma_n2), candidate)) {
    out.eigensolver_failed = true;
    static std::once_flag logged;
    std::call_once(logged, [] { std::cerr << "ris_phase_update: eigensolver did not converge, keeping phases\n"; });
    return out;
  }
  const double t = mean_throughput(scenarios, G, candidate, sigma_n2);
  if (t >= out.throughput_before) {
    out.phi = std::move(candidate);
    out.throughput_after = t;
    out.accepted = true;
  }
  return out;
}

AoResult ao_core(std::span<const Scenario> scenarios, double p_max, double sigma_n2, const AoConfig& cfg) {
  cfg.validate();
  if (scenarios.empty() || scenarios.front().empty()) throw DimensionError("ao_core: no scenarios");
  const Eigen::Index N = scenarios.front().front().rows();
  AoResult out;
  out.phi = CVector::Ones(N);
  {
    const auto H = effective_channels(scenarios, out.phi);
    CMatrix H_mean = CMatrix::Zero(H.front().rows(), H.front().cols());
    for (const auto& h : H) H_mean += h;
    out.G = matched_filter(H_mean / static_cast<double>(H.size()), p_max);
  }
  double current = mean_throughput(scenarios, out.G, out.phi, sigma_n2);
  out.trace.push_back(current);

  for (int round = 0; round < cfg.a_max; ++round) {
    const double start = current;
    const auto H = effective_channels(scenarios, out.phi);
    WmmseResult w = wmmse_precoder(H, p_max, sigma_n2, cfg, &out.G);
    // the best iterate includes the warm start, so this never decreases
    out.G = std::move(w.G);
    current = mean_throughput(scenarios, out.G, out.phi, sigma_n2);
    if (cfg.optimize_ris) {
      RisUpdate r = ris_phase_update(scenarios, out.G, out.phi, sigma_n2);
      if (r.accepted) {
        out.phi = std::move(r.phi);
        current = r.throughput_after;
        ++out.ris_accepted;
      } else {
        ++out.ris_rejected;
      }
    }
    out.trace.push_back(current);
    ++out.rounds;
    if (cfg.early_exit && current - start < cfg.tolerance) break;
  }
  return out;
}

AoResult ao_wmmse(const channel::Downlink& downlink, const channel::ChannelContext& ctx, const AoConfig& cfg) {
  const std::vector<Scenario> nominal{channel::cascaded_all(ctx.H2_est, ctx.H1_est)};
  return ao_core(nominal, downlink.cfg.p_max, downlink.cfg.sigma_n2(), cfg);
}

AoResult ao_wmmse_saa(const channel::Downlink& downlink, const channel::ChannelContext& ctx,
                      const env::UncertaintyConfig& ucfg, const AoConfig& cfg, Rng& jitter_rng, Rng& csi_rng) {
  cfg.validate();
  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(cfg.s_saa));
  for (int s = 0; s < cfg.s_saa; ++s)
    scenarios.push_back(channel::sample_true_cascaded(downlink, ctx, ucfg.sigma_j, ucfg.rho, jitter_rng, csi_rng));
  return ao_core(scenarios, downlink.cfg.p_max, downlink.cfg.sigma_n2(), cfg);
}

CVector fixed_random_phases(int N, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  CVector phi(N);
  for (int n = 0; n < N; ++n) phi(n) = std::polar(1.0, u(rng));
  return phi;
}

}  // namespace uavris::baselines
