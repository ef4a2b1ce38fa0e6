#pragma once

#include <span>
#include <vector>

#include "uavris/channel_model.hpp"
#include "uavris/environment.hpp"
#include "uavris/rng.hpp"
#include "uavris/types.hpp"

namespace uavris::baselines {

struct AoConfig {
  int a_max = 70;     ///< outer AO rounds
  int w_in = 12;      ///< WMMSE rounds per outer round
  int n_bisect = 30;  ///< power-multiplier halvings
  int s_saa = 6;      ///< SAA scenario count
  double tolerance = 1e-4;   ///< bps/Hz, outer early exit
  bool early_exit = false;
  bool optimize_ris = true;  ///< false freezes the RIS at its initial phases

  void validate() const;
};

/// Per-user cascaded channels C_k = diag(h_2k^H) H_1 of one scenario.
using Scenario = std::vector<CMatrix>;

/// Columns h_k (conjugated rows of H_eff) scaled jointly to tr(G G^H) = P_max.
CMatrix matched_filter(const CMatrix& H_eff, double p_max);

struct WmmseResult {
  CMatrix G;                  ///< best iterate
  std::vector<double> trace;  ///< objective before round 1 and after every round
  int regularized_solves = 0;
};

/// WMMSE on a scenario-averaged objective: u/w updates per scenario, one
/// precoder update on the averaged quadratic terms with the power multiplier
/// found by bisection. The trace holds the scenario-mean sum throughput.
WmmseResult wmmse_precoder(std::span<const CMatrix> H_effs, double p_max, double sigma_n2, const AoConfig& cfg,
                           const CMatrix* G_init = nullptr);

/// Single-channel convenience overload.
WmmseResult wmmse_precoder(const CMatrix& H_eff, double p_max, double sigma_n2, const AoConfig& cfg,
                           const CMatrix* G_init = nullptr);

/// Weighted-MSE surrogate in the RIS vector v: f(v) = v^H Q v - 2 Re(q^H v) + c,
/// with receivers and weights taken at (G, phi) and summed over scenarios.
struct RisSurrogate {
  CMatrix Q;  ///< N x N Hermitian PSD
  CVector q;
};

RisSurrogate ris_surrogate(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi,
                           double sigma_n2);

/// Dominant eigenvector of the shifted homogenised form, projected onto the
/// unit circle. Returns false if the eigensolver fails.
bool ris_phase_candidate(const RisSurrogate& s, CVector& phi_out);

struct RisUpdate {
  CVector phi;
  bool accepted = false;
  bool eigensolver_failed = false;
  double throughput_before = 0.0;
  double throughput_after = 0.0;
};

/// Scenario-mean sum throughput of (G, phi).
double mean_throughput(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi, double sigma_n2);

/// Keeps the current phases unless the candidate does not decrease the
/// scenario-mean throughput.
RisUpdate ris_phase_update(std::span<const Scenario> scenarios, const CMatrix& G, const CVector& phi,
                           double sigma_n2);

struct AoResult {
  CMatrix G;
  CVector phi;
  std::vector<double> trace;  ///< throughput of the initial point and after each outer round
  int ris_accepted = 0;
  int ris_rejected = 0;
  int rounds = 0;
};

/// Alternating WMMSE precoding and RIS phase updates over the given scenarios.
/// Starts from zero phases and the matched filter.
AoResult ao_core(std::span<const Scenario> scenarios, double p_max, double sigma_n2, const AoConfig& cfg);

/// AO-WMMSE on the nominal (estimated) channels.
AoResult ao_wmmse(const channel::Downlink& downlink, const channel::ChannelContext& ctx, const AoConfig& cfg);

/// Draws S_saa jitter + CSI-error scenarios exactly as the reward does and
/// runs AO on their average.
AoResult ao_wmmse_saa(const channel::Downlink& downlink, const channel::ChannelContext& ctx,
                      const env::UncertaintyConfig& ucfg, const AoConfig& cfg, Rng& jitter_rng, Rng& csi_rng);

/// Phases i.i.d. uniform on [0, 2pi).
CVector fixed_random_phases(int N, Rng& rng);

}  // namespace uavris::baselines
