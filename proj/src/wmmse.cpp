#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>

#include <fmt/core.h>

#include "uavris/baselines.hpp"

namespace uavris::baselines {

void AoConfig::validate() const {
  if (a_max < 1 || w_in < 1 || n_bisect < 1 || s_saa < 1)
    throw ConfigError("AO iteration counts and S_saa must all be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("AO tolerance must be non-negative");
}

CMatrix matched_filter(const CMatrix& H_eff, double p_max) {
  CMatrix G = H_eff.adjoint();
  const double norm = G.norm();
  if (norm == 0.0) return G;
  return G * (std::sqrt(p_max) / norm);
}

namespace {

double mean_rate(std::span<const CMatrix> H_effs, const CMatrix& G, double sigma_n2) {
  double total = 0.0;
  for (const auto& H : H_effs) total += channel::throughput(H, G, sigma_n2);
  return total / static_cast<double>(H_effs.size());
}

struct PrecoderSystem {
  CMatrix A;  ///< M x M, scenario-averaged sum_k w |u|^2 h h^H
  CMatrix B;  ///< M x K, scenario-averaged w u h
};

PrecoderSystem build_system(std::span<const CMatrix> H_effs, const CMatrix& G, double sigma_n2) {
  const Eigen::Index M = G.rows(), K = G.cols();
  PrecoderSystem sys{CMatrix::Zero(M, M), CMatrix::Zero(M, K)};
  const double inv_s = 1.0 / static_cast<double>(H_effs.size());
  for (const auto& H : H_effs) {
    const CMatrix inner = H * G;  // (k, j) = h_k^H g_j
    for (Eigen::Index k = 0; k < K; ++k) {
      const double total = inner.row(k).squaredNorm() + sigma_n2;
      const cplx u = inner(k, k) / total;
      // w = 1 / mmse = total / (total - |h_k^H g_k|^2)
      const double w = total / (total - std::norm(inner(k, k)));
      const CVector h = H.row(k).adjoint();
      sys.A.noalias() += (inv_s * w * std::norm(u)) * (h * h.adjoint());
      sys.B.col(k) += (inv_s * w) * u * h;
    }
  }
  // keep A exactly Hermitian
  sys.A = 0.5 * (sys.A + sys.A.adjoint()).eval();
  return sys;
}

/// G(mu) = (A + mu I)^{-1} B; flags whether the regularisation floor was needed.
CMatrix solve_regularized(const CMatrix& A, const CMatrix& B, double mu, double floor, bool& regularized) {
  const Eigen::Index M = A.rows();
  Eigen::LLT<CMatrix> llt(A + mu * CMatrix::Identity(M, M));
  if (llt.info() == Eigen::Success && mu > 0.0) return llt.solve(B);
  if (llt.info() == Eigen::Success) {
    const CMatrix G = llt.solve(B);
    if (G.allFinite()) return G;
  }
  regularized = true;
  Eigen::LLT<CMatrix> reg(A + (mu + floor) * CMatrix::Identity(M, M));
  return reg.solve(B);
}

}  // namespace

WmmseResult wmmse_precoder(std::span<const CMatrix> H_effs, double p_max, double sigma_n2, const AoConfig& cfg,
                           const CMatrix* G_init) {
  if (H_effs.empty()) throw DimensionError("wmmse_precoder: no channels");
  for (const auto& H : H_effs)
    if (!H.allFinite()) throw std::invalid_argument("wmmse_precoder: non-finite channel");
  const Eigen::Index M = H_effs.front().cols();
  WmmseResult out;
  CMatrix G;
  if (G_init) {
    G = *G_init;
  } else {
    // matched filter of the scenario mean
    CMatrix H_mean = CMatrix::Zero(H_effs.front().rows(), M);
    for (const auto& H : H_effs) H_mean += H;
    G = matched_filter(H_mean / static_cast<double>(H_effs.size()), p_max);
  }
  double best = mean_rate(H_effs, G, sigma_n2);
  out.G = G;
  out.trace.push_back(best);
  const double limit = std::sqrt(p_max);

  for (int round = 0; round < cfg.w_in; ++round) {
    const PrecoderSystem sys = build_system(H_effs, G, sigma_n2);
    const double trace_a = sys.A.real().trace();
    const double floor = 1e-12 * std::max(trace_a, std::numeric_limits<double>::min());
    bool regularized = false;

    CMatrix candidate = solve_regularized(sys.A, sys.B, 0.0, floor, regularized);
    if (candidate.norm() > limit) {
      // (A + mu I)^{-1} has norm <= 1/mu, so mu = |B|_F / sqrt(P) is feasible
      double hi = std::max(sys.B.norm() / limit, floor);
      while (solve_regularized(sys.A, sys.B, hi, floor, regularized).norm() > limit) hi *= 2.0;
      double lo = 0.0;
      for (int it = 0; it < cfg.n_bisect; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (solve_regularized(sys.A, sys.B, mid, floor, regularized).norm() > limit) lo = mid; else hi = mid;
      }
      candidate = solve_regularized(sys.A, sys.B, hi, floor, regularized);
      // uniform up-scaling to the budget can only raise every SINR
      const double norm = candidate.norm();
      if (norm > 0.0) candidate *= limit / norm;
    }
    if (regularized) {
      ++out.regularized_solves;
      static std::once_flag logged;
      std::call_once(logged, [&] {
        std::cerr << fmt::format("wmmse: singular precoder system, regularised with floor {:.3e}\n", floor);
      });
    }
    G = std::move(candidate);
    const double rate = mean_rate(H_effs, G, sigma_n2);
    out.trace.push_back(rate);
    if (rate > best) {
      best = rate;
      out.G = G;
    }
  }
  return out;
}

WmmseResult wmmse_precoder(const CMatrix& H_eff, double p_max, double sigma_n2, const AoConfig& cfg,
                           const CMatrix* G_init) {
  return wmmse_precoder(std::span<const CMatrix>(&H_eff, 1), p_max, sigma_n2, cfg, G_init);
}

}  // namespace uavris::baselines
