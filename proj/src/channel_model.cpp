#include "uavris/channel_model.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

#include <fmt/core.h>

namespace uavris::channel {

int SystemConfig::ris_side() const {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(N))));
  return side;
}

void SystemConfig::validate() const {
  if (M < 1 || N < 1 || K < 1) throw ConfigError("M, N and K must all be >= 1");
  if (ris_side() * ris_side() != N) throw ConfigError(fmt::format("N = {} is not a perfect square", N));
  if (!(carrier_hz > 0.0)) throw ConfigError("carrier frequency must be positive");
  if (!(p_max > 0.0)) throw ConfigError("P_max must be positive");
  if (!(eta_nlos > 0.0 && eta_nlos <= 1.0)) throw ConfigError("eta_NLoS must lie in (0, 1]");
  if (rician_k1 < 0.0 || rician_k2 < 0.0) throw ConfigError("Rician factors must be non-negative");
  if (!(kappa1 > 0.0 && kappa2 > 0.0)) throw ConfigError("reference path gains must be positive");
  if (!std::isfinite(sigma_n2()) || !(sigma_n2() > 0.0)) throw ConfigError("noise power must be positive");
}

ArrayGeometry make_geometry(const SystemConfig& cfg) {
  const double half = cfg.wavelength() / 2.0;
  ArrayGeometry g;
  g.bs_coords.resize(cfg.M, 3);
  for (int m = 0; m < cfg.M; ++m) {
    const double z = (m - (cfg.M - 1) / 2.0) * half;
    g.bs_coords.row(m) = (cfg.p_bs + Vec3(0.0, 0.0, z)).transpose();
  }
  // element n = ix * side + iy
  const int side = cfg.ris_side();
  g.ris_offsets.resize(cfg.N, 3);
  for (int ix = 0; ix < side; ++ix) {
    for (int iy = 0; iy < side; ++iy) {
      const int n = ix * side + iy;
      g.ris_offsets(n, 0) = (ix - (side - 1) / 2.0) * half;
      g.ris_offsets(n, 1) = (iy - (side - 1) / 2.0) * half;
      g.ris_offsets(n, 2) = 0.0;
    }
  }
  return g;
}

CVector steering_vector(const Coords& coords, const Vec3& u, double lambda) {
  if (std::abs(u.norm() - 1.0) > 1e-9)
    throw GeometryError(fmt::format("steering direction has norm {}, expected 1", u.norm()));
  if (coords.rows() < 1) throw GeometryError("steering vector needs at least one element");
  const double k = 2.0 * kPi / lambda;
  CVector a(coords.rows());
  for (Eigen::Index l = 0; l < coords.rows(); ++l) {
    const double phase = -k * coords.row(l).dot(u);
    a(l) = cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

double atg_los_probability(double theta_el_deg, double a, double b) {
  return 1.0 / (1.0 + a * std::exp(-b * (theta_el_deg - a)));
}

double elevation_deg(const SystemConfig& cfg) {
  const Vec3 d = cfg.q_uav - cfg.p_bs;
  const double d1 = d.norm();
  if (d1 == 0.0) throw GeometryError("UAV coincides with the BS");
  return rad_to_deg(std::asin(d.z() / d1));
}

double pathloss_bs_ris(const SystemConfig& cfg, double d1, double theta_el_deg) {
  if (!(d1 > 0.0)) throw GeometryError("BS-RIS distance must be positive");
  const double p_los = atg_los_probability(theta_el_deg, cfg.atg_a, cfg.atg_b);
  return cfg.kappa1 * (p_los + (1.0 - p_los) * cfg.eta_nlos) * std::pow(d1, -cfg.alpha1);
}

double pathloss_ris_user(const SystemConfig& cfg, double d2) {
  if (!(d2 > 0.0)) throw GeometryError("RIS-user distance must be positive");
  return cfg.kappa2 * std::pow(d2, -cfg.alpha2);
}

BsRisLink make_bs_ris_link(const SystemConfig& cfg, const ArrayGeometry& geometry) {
  BsRisLink link;
  const Vec3 d = cfg.q_uav - cfg.p_bs;
  link.d1 = d.norm();
  if (link.d1 == 0.0) throw GeometryError("UAV coincides with the BS");
  link.theta_el_deg = elevation_deg(cfg);
  link.beta1 = pathloss_bs_ris(cfg, link.d1, link.theta_el_deg);
  link.u_aod = d / link.d1;
  link.u_aoa = -link.u_aod;
  link.a_bs = steering_vector(geometry.bs_coords, link.u_aod, cfg.wavelength());
  return link;
}

CMatrix rician_mix(double beta, double k_factor, const CMatrix& los, const CMatrix& nlos) {
  const double w_los = std::sqrt(k_factor / (k_factor + 1.0));
  const double w_nlos = std::sqrt(1.0 / (k_factor + 1.0));
  return std::sqrt(beta) * (w_los * los + w_nlos * nlos);
}

namespace {

CMatrix h1_los(const Coords& ris_coords, const BsRisLink& link, double lambda) {
  const CVector a_ris = steering_vector(ris_coords, link.u_aoa, lambda);
  return a_ris * link.a_bs.adjoint();
}

CMatrix h2_los(const Coords& ris_coords, const RMatrix& u_users, double lambda) {
  CMatrix los(ris_coords.rows(), u_users.rows());
  for (Eigen::Index k = 0; k < u_users.rows(); ++k)
    los.col(k) = steering_vector(ris_coords, u_users.row(k).transpose(), lambda);
  return los;
}

CMatrix h2_mix(const SystemConfig& cfg, const RVector& beta2, const CMatrix& los, const CMatrix& nlos) {
  CMatrix H2(los.rows(), los.cols());
  for (Eigen::Index k = 0; k < los.cols(); ++k)
    H2.col(k) = rician_mix(beta2(k), cfg.rician_k2, los.col(k), nlos.col(k));
  return H2;
}

}  // namespace

ChannelContext sample_channels(const SystemConfig& cfg, const ArrayGeometry& geometry,
                               const BsRisLink& link, const RMatrix& user_positions,
                               Rng& nlos_rng) {
  if (user_positions.rows() != cfg.K || user_positions.cols() != 3)
    throw DimensionError("user_positions must be K x 3");
  ChannelContext ctx;
  ctx.user_positions = user_positions;
  ctx.beta1 = link.beta1;
  ctx.d2.resize(cfg.K);
  ctx.beta2.resize(cfg.K);
  ctx.u_users.resize(cfg.K, 3);
  for (int k = 0; k < cfg.K; ++k) {
    const Vec3 diff = user_positions.row(k).transpose() - cfg.q_uav;
    const double d2 = diff.norm();
    if (d2 == 0.0) throw GeometryError(fmt::format("user {} coincides with the UAV", k));
    ctx.d2(k) = d2;
    ctx.beta2(k) = pathloss_ris_user(cfg, d2);
    ctx.u_users.row(k) = (diff / d2).transpose();
  }
  const double lambda = cfg.wavelength();
  ctx.H1_nlos = complex_normal_matrix(cfg.N, cfg.M, nlos_rng);
  ctx.H2_nlos = complex_normal_matrix(cfg.N, cfg.K, nlos_rng);
  ctx.H1_est = rician_mix(link.beta1, cfg.rician_k1, h1_los(geometry.ris_offsets, link, lambda), ctx.H1_nlos);
  ctx.H2_est = h2_mix(cfg, ctx.beta2, h2_los(geometry.ris_offsets, ctx.u_users, lambda), ctx.H2_nlos);
  return ctx;
}

JitterSample jitter_rotation(double delta_x, double delta_y, double delta_z) {
  JitterSample j;
  j.delta_x = delta_x;
  j.delta_y = delta_y;
  j.delta_z = delta_z;
  const double cz = std::cos(delta_z), sz = std::sin(delta_z);
  const double cy = std::cos(delta_y), sy = std::sin(delta_y);
  const double cx = std::cos(delta_x), sx = std::sin(delta_x);
  Mat3 yaw, pitch, roll;
  yaw << cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0;
  pitch << cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy;
  roll << 1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx;
  j.R = yaw * pitch * roll;
  j.within_small_angle_bound = std::abs(delta_x) <= kSmallAngleBound &&
                               std::abs(delta_y) <= kSmallAngleBound &&
                               std::abs(delta_z) <= kSmallAngleBound;
  if (!j.within_small_angle_bound) {
    static std::once_flag warned;
    std::call_once(warned, [&] {
      std::cerr << fmt::format(
          "warning: jitter angle ({:.4f}, {:.4f}, {:.4f}) rad exceeds the small-angle bound {} rad\n",
          delta_x, delta_y, delta_z, kSmallAngleBound);
    });
  }
  return j;
}

JitterSample sample_jitter(double sigma_j, Rng& rng) {
  if (sigma_j == 0.0) return jitter_rotation(0.0, 0.0, 0.0);
  const double dx = sigma_j * standard_normal(rng);
  const double dy = sigma_j * standard_normal(rng);
  const double dz = sigma_j * standard_normal(rng);
  return jitter_rotation(dx, dy, dz);
}

Coords apply_jitter(const Coords& ris_offsets, const JitterSample& jitter) {
  return ris_offsets * jitter.R.transpose();
}

ChannelPair jittered_channels(const SystemConfig& cfg, const ChannelContext& ctx,
                              const ArrayGeometry& geometry, const BsRisLink& link,
                              const JitterSample& jitter) {
  const Coords rotated = apply_jitter(geometry.ris_offsets, jitter);
  const double lambda = cfg.wavelength();
  ChannelPair out;
  out.H1 = rician_mix(ctx.beta1, cfg.rician_k1, h1_los(rotated, link, lambda), ctx.H1_nlos);
  out.H2 = h2_mix(cfg, ctx.beta2, h2_los(rotated, ctx.u_users, lambda), ctx.H2_nlos);
  return out;
}

CMatrix cascaded(const CVector& h2k, const CMatrix& H1) {
  if (h2k.size() != H1.rows())
    throw DimensionError(fmt::format("cascaded: h2k has {} entries, H1 has {} rows", h2k.size(), H1.rows()));
  return h2k.conjugate().asDiagonal() * H1;
}

std::vector<CMatrix> cascaded_all(const CMatrix& H2, const CMatrix& H1) {
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(H2.cols()));
  for (Eigen::Index k = 0; k < H2.cols(); ++k) out.push_back(cascaded(H2.col(k), H1));
  return out;
}

CMatrix corrupt_csi(const CMatrix& H, double rho, double sigma_k2, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument(fmt::format("CSI quality rho = {} outside [0, 1]", rho));
  if (rho == 1.0) return H;
  const CMatrix E = complex_normal_matrix(H.rows(), H.cols(), rng, sigma_k2);
  return rho * H + std::sqrt(1.0 - rho * rho) * E;
}

namespace {

void check_unit_modulus(const CVector& phi) {
  for (Eigen::Index n = 0; n < phi.size(); ++n)
    if (std::abs(std::abs(phi(n)) - 1.0) > 1e-9)
      throw DimensionError(fmt::format("RIS coefficient {} has modulus {}", n, std::abs(phi(n))));
}

}  // namespace

CMatrix effective_channel(const CMatrix& H2, const CVector& phi, const CMatrix& H1) {
  if (H2.rows() != phi.size() || H1.rows() != phi.size())
    throw DimensionError("effective_channel: N mismatch between H2, phi and H1");
  check_unit_modulus(phi);
  return H2.adjoint() * phi.asDiagonal() * H1;
}

CMatrix effective_channel(std::span<const CMatrix> cascaded_k, const CVector& phi) {
  check_unit_modulus(phi);
  if (cascaded_k.empty()) throw DimensionError("effective_channel: no users");
  CMatrix H_eff(static_cast<Eigen::Index>(cascaded_k.size()), cascaded_k.front().cols());
  for (std::size_t k = 0; k < cascaded_k.size(); ++k) {
    if (cascaded_k[k].rows() != phi.size()) throw DimensionError("effective_channel: N mismatch");
    H_eff.row(static_cast<Eigen::Index>(k)) = phi.transpose() * cascaded_k[k];
  }
  return H_eff;
}

double sinr_k(const CMatrix& H_eff, const CMatrix& G, double sigma_n2, int k) {
  if (H_eff.cols() != G.rows() || H_eff.rows() != G.cols())
    throw DimensionError("sinr: H_eff must be K x M and G must be M x K");
  double signal = 0.0, interference = 0.0;
  for (Eigen::Index j = 0; j < G.cols(); ++j) {
    const double p = std::norm((H_eff.row(k) * G.col(j)).value());
    if (j == k) signal = p; else interference += p;
  }
  return signal / (interference + sigma_n2);
}

double throughput(const CMatrix& H_eff, const CMatrix& G, double sigma_n2) {
  if (H_eff.cols() != G.rows() || H_eff.rows() != G.cols())
    throw DimensionError("throughput: H_eff must be K x M and G must be M x K");
  // |h_k^H g_j|^2 for all pairs at once
  const Eigen::MatrixXd gains = (H_eff * G).cwiseAbs2();
  double total = 0.0;
  for (Eigen::Index k = 0; k < gains.rows(); ++k) {
    const double signal = gains(k, k);
    double interference = 0.0;
    for (Eigen::Index j = 0; j < gains.cols(); ++j)
      if (j != k) interference += gains(k, j);
    total += std::log2(1.0 + signal / (interference + sigma_n2));
  }
  return total;
}

}  // namespace uavris::channel

namespace uavris::channel {

Downlink::Downlink(const SystemConfig& config) : cfg(config) {
  cfg.validate();
  geometry = make_geometry(cfg);
  link = make_bs_ris_link(cfg, geometry);
}

std::vector<CMatrix> sample_true_cascaded(const Downlink& downlink, const ChannelContext& ctx,
                                          double sigma_j, double rho, Rng& jitter_rng, Rng& csi_rng) {
  std::vector<CMatrix> out;
  if (sigma_j == 0.0) {
    out = cascaded_all(ctx.H2_est, ctx.H1_est);
  } else {
    const JitterSample jitter = sample_jitter(sigma_j, jitter_rng);
    const ChannelPair jittered = jittered_channels(downlink.cfg, ctx, downlink.geometry, downlink.link, jitter);
    out = cascaded_all(jittered.H2, jittered.H1);
  }
  if (rho != 1.0)
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = corrupt_csi(out[k], rho, ctx.beta1 * ctx.beta2(static_cast<Eigen::Index>(k)), csi_rng);
  return out;
}

}  // namespace uavris::channel
