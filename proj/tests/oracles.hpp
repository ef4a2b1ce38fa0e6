#pragma once

// Test-side reference computations shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "uavris/agent.hpp"
#include "uavris/environment.hpp"
#include "uavris/rng.hpp"

namespace oracle {

using namespace uavris;

/// Raw action with ||G_raw||_F outside [0.99, 1.01] sqrt(P) and every RIS
/// pair norm above 0.05, i.e. away from the projection's kinks.
inline RVector smooth_raw_action(const env::ActionMapper& mapper, Rng& rng) {
  const int bf = mapper.layout().beamformer_dim();
  const double limit = std::sqrt(mapper.p_max());
  for (;;) {
    RVector x(mapper.raw_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = standard_normal(rng) * 0.4;
    const double g = x.head(bf).norm();
    if (g > 0.99 * limit && g < 1.01 * limit) continue;
    bool ok = true;
    const int N = (x.size() - bf) / 2;
    for (int n = 0; n < N; ++n)
      if (std::hypot(x(bf + n), x(bf + N + n)) < 0.05) ok = false;
    if (ok) return x;
  }
}

/// Central-difference Jacobian of raw -> projected features.
inline RMatrix fd_feature_jacobian(const env::ActionMapper& mapper, const RVector& x, double h) {
  const Eigen::Index d = x.size();
  RMatrix J(mapper.feature_dim(), d);
  for (Eigen::Index j = 0; j < d; ++j) {
    RVector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (mapper.features(mapper.project(xp)) - mapper.features(mapper.project(xm))) / (2.0 * h);
  }
  return J;
}

/// Jacobian assembled row by row from the mapper's vector-Jacobian product.
inline RMatrix vjp_jacobian(const env::ActionMapper& mapper, const RVector& x) {
  RMatrix J(mapper.feature_dim(), x.size());
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    RVector e = RVector::Zero(J.rows());
    e(i) = 1.0;
    J.row(i) = mapper.vjp(x, e).transpose();
  }
  return J;
}

/// Mean over the batch of Q1(s, Pi(mu(s))), evaluated directly.
inline double mean_policy_value(const drl::Agent& agent, const RMatrix& states) {
  double total = 0.0;
  Rng unused(0);
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    const RVector s = states.col(i);
    const auto choice = agent.select_action(s, false, unused);
    total += agent.critic_forward(s, choice.features, 0);
  }
  return total / static_cast<double>(states.cols());
}

struct GradientCheck {
  double max_relative_error = 0.0;
  int coordinates = 0;
};

/// Compares -actor_gradient (ascent direction of mean Q) with central
/// differences on `count` actor coordinates whose analytic gradient is not
/// negligible (> 1e-3 of the largest entry).
inline GradientCheck actor_gradient_check(drl::Agent& agent, const RMatrix& states, int count, Rng& rng,
                                          double h = 1e-6) {
  const drl::MlpGrads g = agent.actor_gradient(states);
  const RVector analytic = -drl::Mlp::flatten(g);
  const double gmax = analytic.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < analytic.size(); ++i)
    if (std::abs(analytic(i)) > 1e-3 * gmax) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(count)));

  GradientCheck out;
  const RVector theta = agent.actor().net.flatten();
  for (const auto i : candidates) {
    RVector tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    agent.actor().net.assign(tp);
    const double fp = mean_policy_value(agent, states);
    agent.actor().net.assign(tm);
    const double fm = mean_policy_value(agent, states);
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(fd - analytic(i)) / std::max(std::abs(fd), std::abs(analytic(i)));
    out.max_relative_error = std::max(out.max_relative_error, rel);
    ++out.coordinates;
  }
  agent.actor().net.assign(theta);
  return out;
}

}  // namespace oracle

#include "uavris/channel_model.hpp"

namespace oracle {

/// M=2, N=2, K=1 instance: the first two RIS rows of a context drawn on a
/// 2x2 array (N=2 has no square layout).
inline std::vector<CMatrix> two_element_instance(const env::Environment& e, Rng& placement, Rng& nlos) {
  const auto ep = e.reset(placement, nlos);
  return channel::cascaded_all(ep.ctx.H2_est.topRows(2), ep.ctx.H1_est.topRows(2));
}

/// Best single-user rate over a dense phase grid, each point paired with the
/// closed-form max-ratio precoder: log2(1 + P ||h_eff||^2 / sigma^2).
inline double single_user_grid_rate(const std::vector<CMatrix>& cascaded, double p_max, double sigma_n2,
                                    int points_per_element) {
  const CMatrix& C = cascaded.front();
  const int N = static_cast<int>(C.rows());
  std::vector<int> idx(static_cast<std::size_t>(N), 0);
  double best = 0.0;
  for (;;) {
    CVector phi(N);
    for (int n = 0; n < N; ++n)
      phi(n) = std::polar(1.0, 2.0 * kPi * idx[static_cast<std::size_t>(n)] / points_per_element);
    const double gain = (phi.transpose() * C).squaredNorm();
    best = std::max(best, std::log2(1.0 + p_max * gain / sigma_n2));
    int n = 0;
    while (n < N && ++idx[static_cast<std::size_t>(n)] == points_per_element) idx[static_cast<std::size_t>(n++)] = 0;
    if (n == N) break;
  }
  return best;
}

}  // namespace oracle
