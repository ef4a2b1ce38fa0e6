#pragma once

#include <optional>
#include <vector>

#include "uavris/channel_model.hpp"
#include "uavris/rng.hpp"
#include "uavris/types.hpp"

namespace uavris::env {

/// Jitter, CSI quality and Monte Carlo sample count seen by the reward.
struct UncertaintyConfig {
  double sigma_j = 0.0;  ///< rad
  double rho = 1.0;
  int samples = 6;

  void validate() const;
};

/// Candidate ground positions users are drawn from, without replacement,
/// at every reset.
struct EpisodePool {
  RMatrix candidates;  ///< P x 3, z = 0

  Eigen::Index size() const { return candidates.rows(); }
};

struct PoolRegion {
  double x_min = 70.0, x_max = 130.0;
  double y_min = -30.0, y_max = 30.0;
};

EpisodePool make_user_pool(int size, Rng& rng, const PoolRegion& region = {});

/// Picks K distinct candidates (partial Fisher-Yates). Throws if the pool is smaller than K.
RMatrix sample_users(const EpisodePool& pool, int K, Rng& rng);

struct DecodedAction {
  CMatrix G_raw;    ///< M x K
  RMatrix phi_raw;  ///< N x 2
};

/// Projected, always-feasible action.
struct FeasibleAction {
  CMatrix G;    ///< M x K, tr(G G^H) <= P_max
  CVector phi;  ///< N unit-modulus RIS coefficients
  int fallback_rows = 0;  ///< RIS pairs with near-zero norm mapped to phase 0
};

inline constexpr double kPhaseFallbackNorm = 1e-12;

/// Layout of the real action vector:
///   [Re vec(G), Im vec(G), Re phi, Im phi]
/// with vec() column-major, so the first M*K entries are Re(G) column by column.
struct ActionLayout {
  int M = 0, N = 0, K = 0;

  int beamformer_dim() const { return 2 * M * K; }
  int dim() const { return 2 * M * K + 2 * N; }

  DecodedAction decode(const RVector& raw) const;
  RVector encode(const CMatrix& G, const RMatrix& phi_pairs) const;
};

/// Frobenius-ball projection of G and per-element normalisation of the RIS
/// pairs. Zero rows fall back to phase 0.
FeasibleAction safety_project(const CMatrix& G_raw, const RMatrix& phi_raw, double p_max);

/// Maps raw policy outputs to feasible actions and back-propagates through
/// the projection. In beamformer-only mode the raw vector holds just the
/// 2MK beamformer coordinates and the RIS stays at `fixed_phi`.
class ActionMapper {
 public:
  ActionMapper(int M, int N, int K, double p_max, std::optional<CVector> fixed_phi = std::nullopt);

  int raw_dim() const;
  /// Dimension of the critic's action input (same layout as raw).
  int feature_dim() const { return raw_dim(); }
  bool beamformer_only() const { return fixed_phi_.has_value(); }
  const ActionLayout& layout() const { return layout_; }
  double p_max() const { return p_max_; }

  FeasibleAction project(const RVector& raw) const;
  RVector features(const FeasibleAction& action) const;
  /// Vector-Jacobian product: gradient w.r.t. the projected features pulled back to raw.
  RVector vjp(const RVector& raw, const RVector& grad_features) const;

 private:
  ActionLayout layout_;
  double p_max_;
  std::optional<CVector> fixed_phi_;
};

enum class StateScaling { none, standardize };

struct RewardResult {
  double reward = 0.0;
  std::vector<double> per_sample;
};

struct StepResult {
  double reward = 0.0;
  std::vector<double> per_sample;
  FeasibleAction action;
  bool done = true;
};

struct Episode {
  channel::ChannelContext ctx;
  RVector state;
};

/// Mean over S fresh jitter + CSI-error realisations of the sum throughput
/// on the true channels. Context NLoS draws and user positions are reused.
RewardResult monte_carlo_reward(const channel::Downlink& downlink, const channel::ChannelContext& ctx,
                                const CMatrix& G, const CVector& phi, const UncertaintyConfig& ucfg,
                                Rng& jitter_rng, Rng& csi_rng);

/// Process-wide number of monte_carlo_reward calls, for instrumentation checks.
std::uint64_t reward_evaluation_count();

/// One-step contextual-bandit environment.
class Environment {
 public:
  Environment(const channel::SystemConfig& cfg, const UncertaintyConfig& ucfg, EpisodePool pool,
              std::optional<CVector> fixed_phi = std::nullopt);

  const channel::Downlink& downlink() const { return downlink_; }
  const UncertaintyConfig& uncertainty() const { return ucfg_; }
  const ActionMapper& mapper() const { return mapper_; }
  const EpisodePool& pool() const { return pool_; }

  int state_dim() const;
  int action_dim() const { return mapper_.raw_dim(); }

  /// New context: fresh user draw and NLoS; the BS-RIS geometry stays fixed.
  Episode reset(Rng& placement_rng, Rng& nlos_rng) const;

  /// [d2 (K), Re H1, Im H1, Re H2, Im H2], matrices flattened column-major,
  /// followed by the configured scaling.
  RVector encode_state(const channel::ChannelContext& ctx) const;

  StepResult step(const channel::ChannelContext& ctx, const RVector& raw_action, Rng& jitter_rng,
                  Rng& csi_rng) const;

  /// Per-feature standardisation fitted on `episodes` reset draws.
  void fit_standardizer(int episodes, Rng& placement_rng, Rng& nlos_rng);
  StateScaling scaling() const { return scaling_; }

 private:
  RVector raw_state(const channel::ChannelContext& ctx) const;

  channel::Downlink downlink_;
  UncertaintyConfig ucfg_;
  EpisodePool pool_;
  ActionMapper mapper_;
  StateScaling scaling_ = StateScaling::none;
  RVector state_mean_;
  RVector state_inv_std_;
};

}  // namespace uavris::env
