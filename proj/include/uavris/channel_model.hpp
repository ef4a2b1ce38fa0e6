#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "uavris/rng.hpp"
#include "uavris/types.hpp"

namespace uavris::channel {

/// Physical and channel constants of the BS -> UAV-RIS -> users downlink.
/// Defaults reproduce the reference urban IoT scenario (M=4, N=16, K=4 at 24 GHz).
struct SystemConfig {
  int M = 4;  ///< BS antennas
  int N = 16; ///< RIS elements, a perfect square
  int K = 4;  ///< single-antenna users
  double carrier_hz = 24e9;
  Vec3 p_bs{0.0, 0.0, 20.0};
  Vec3 q_uav{50.0, 0.0, 50.0};
  double p_max = 1.0;          ///< W
  double noise_dbw = -131.0;   ///< noise power in dBW
  double atg_a = 9.61;
  double atg_b = 0.16;
  double alpha1 = 2.2;
  double alpha2 = 2.4;
  double eta_nlos = 0.5;
  double kappa1 = 1.0;
  double kappa2 = 1e-3;
  double rician_k1 = 3.0;
  double rician_k2 = 2.0;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  /// Linear noise power, 10^(dBW/10).
  double sigma_n2() const { return std::pow(10.0, noise_dbw / 10.0); }
  int ris_side() const;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// BS ULA along z centred on p_bs; RIS UPA on the xy-plane centred on the
/// array origin (offsets are relative to q_uav).
struct ArrayGeometry {
  Coords bs_coords;
  Coords ris_offsets;
};

ArrayGeometry make_geometry(const SystemConfig& cfg);

/// Element l equals exp(-j 2pi/lambda p_l^T u). Throws GeometryError unless |u| = 1.
CVector steering_vector(const Coords& coords, const Vec3& u, double lambda);

/// Air-to-ground LoS probability; elevation in degrees.
double atg_los_probability(double theta_el_deg, double a, double b);

/// Elevation of the UAV seen from the BS, arcsin(dz / d1) in degrees.
double elevation_deg(const SystemConfig& cfg);

double pathloss_bs_ris(const SystemConfig& cfg, double d1, double theta_el_deg);
double pathloss_ris_user(const SystemConfig& cfg, double d2);

/// Quantities of the BS-RIS hop that stay fixed across episodes.
struct BsRisLink {
  double d1 = 0.0;
  double theta_el_deg = 0.0;
  double beta1 = 0.0;
  Vec3 u_aod;    ///< BS -> UAV
  Vec3 u_aoa;    ///< -u_aod
  CVector a_bs;  ///< BS steering vector toward the UAV
};

BsRisLink make_bs_ris_link(const SystemConfig& cfg, const ArrayGeometry& geometry);

/// One episode's nominal channels plus the frozen NLoS draws needed to
/// rebuild jittered versions of them.
struct ChannelContext {
  RMatrix user_positions;  ///< K x 3
  RVector d2;              ///< K RIS-user distances
  double beta1 = 0.0;
  RVector beta2;           ///< K
  RMatrix u_users;         ///< K x 3 unit directions UAV -> user
  CMatrix H1_est;          ///< N x M
  CMatrix H2_est;          ///< N x K, columns h_2k
  CMatrix H1_nlos;         ///< N x M, CN(0,1)
  CMatrix H2_nlos;         ///< N x K, CN(0,1)
};

/// Rician superposition sqrt(beta)(sqrt(k/(k+1)) los + sqrt(1/(k+1)) nlos).
CMatrix rician_mix(double beta, double k_factor, const CMatrix& los, const CMatrix& nlos);

/// Builds H1 and every h_2k with fresh CN(0,1) NLoS draws from `nlos_rng`.
ChannelContext sample_channels(const SystemConfig& cfg, const ArrayGeometry& geometry,
                               const BsRisLink& link, const RMatrix& user_positions,
                               Rng& nlos_rng);

struct JitterSample {
  double delta_x = 0.0;  ///< roll
  double delta_y = 0.0;  ///< pitch
  double delta_z = 0.0;  ///< yaw
  Mat3 R = Mat3::Identity();
  bool within_small_angle_bound = true;
};

inline constexpr double kSmallAngleBound = 0.175;

/// R = R_yaw(dz) R_pitch(dy) R_roll(dx). Angles beyond the small-angle bound
/// are accepted; a warning is logged once per process.
JitterSample jitter_rotation(double delta_x, double delta_y, double delta_z);

/// Draws the three angles i.i.d. N(0, sigma_j^2).
JitterSample sample_jitter(double sigma_j, Rng& rng);

/// Rotated offsets P R^T about the array centre.
Coords apply_jitter(const Coords& ris_offsets, const JitterSample& jitter);

struct ChannelPair {
  CMatrix H1;  ///< N x M
  CMatrix H2;  ///< N x K
};

/// Recomputes only the RIS-side LoS terms on rotated coordinates and reuses
/// the context's NLoS draws. The BS array is never rotated.
ChannelPair jittered_channels(const SystemConfig& cfg, const ChannelContext& ctx,
                              const ArrayGeometry& geometry, const BsRisLink& link,
                              const JitterSample& jitter);

/// diag(h2k^H) H1: row n is conj(h2k[n]) H1[n, :].
CMatrix cascaded(const CVector& h2k, const CMatrix& H1);

/// All K cascaded matrices of a channel pair.
std::vector<CMatrix> cascaded_all(const CMatrix& H2, const CMatrix& H1);

/// rho H + sqrt(1 - rho^2) E with E i.i.d. CN(0, sigma_k2). rho == 1 returns
/// H untouched and draws nothing.
CMatrix corrupt_csi(const CMatrix& H, double rho, double sigma_k2, Rng& rng);

/// H2^H diag(phi) H1 (K x M). Throws DimensionError on non-unit-modulus phases.
CMatrix effective_channel(const CMatrix& H2, const CVector& phi, const CMatrix& H1);

/// Row k = phi^T C_k; the per-user cascaded form of the same channel.
CMatrix effective_channel(std::span<const CMatrix> cascaded_k, const CVector& phi);

double sinr_k(const CMatrix& H_eff, const CMatrix& G, double sigma_n2, int k);

/// Sum over users of log2(1 + SINR_k), in bps/Hz.
double throughput(const CMatrix& H_eff, const CMatrix& G, double sigma_n2);

}  // namespace uavris::channel

namespace uavris::channel {

/// A validated configuration together with its derived array geometry and
/// the episode-invariant BS-RIS link.
struct Downlink {
  SystemConfig cfg;
  ArrayGeometry geometry;
  BsRisLink link;

  explicit Downlink(const SystemConfig& config);
};

/// One realisation of the true per-user cascaded channels: fresh jitter
/// applied to the context geometry, then CSI corruption with
/// sigma_k^2 = beta1 * beta2_k. sigma_j in radians.
std::vector<CMatrix> sample_true_cascaded(const Downlink& downlink, const ChannelContext& ctx,
                                          double sigma_j, double rho, Rng& jitter_rng, Rng& csi_rng);

}  // namespace uavris::channel
