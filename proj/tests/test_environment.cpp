#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "uavris/environment.hpp"

using namespace uavris;
using namespace uavris::env;

namespace {

Environment make_env(UncertaintyConfig u = {}, std::uint64_t pool_seed = 8) {
  Rng r = make_stream(pool_seed, 1);
  return Environment(channel::SystemConfig{}, u, make_user_pool(40, r));
}

double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("uncertainty config validation") {
  CHECK_NOTHROW(UncertaintyConfig{}.validate());
  CHECK_THROWS_AS((UncertaintyConfig{0.0, 1.2, 6}.validate()), ConfigError);
  CHECK_THROWS_AS((UncertaintyConfig{-0.1, 1.0, 6}.validate()), ConfigError);
  CHECK_THROWS_AS((UncertaintyConfig{0.0, 1.0, 0}.validate()), ConfigError);
}

TEST_CASE("user pool") {
  Rng rng(1);
  const auto pool = make_user_pool(40, rng);
  REQUIRE(pool.size() == 40);
  for (Eigen::Index i = 0; i < pool.size(); ++i) {
    CHECK(pool.candidates(i, 2) == 0.0);
    CHECK(pool.candidates(i, 0) >= 70.0);
    CHECK(pool.candidates(i, 0) <= 130.0);
    CHECK(std::abs(pool.candidates(i, 1)) <= 30.0);
  }
  const auto small = make_user_pool(3, rng);
  CHECK_THROWS_AS(sample_users(small, 4, rng), ConfigError);

  // without replacement, uniform frequency
  std::map<std::pair<double, double>, int> index;
  for (Eigen::Index i = 0; i < pool.size(); ++i) index[{pool.candidates(i, 0), pool.candidates(i, 1)}] = 0;
  const int resets = 10000;
  for (int r = 0; r < resets; ++r) {
    const RMatrix u = sample_users(pool, 4, rng);
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) CHECK_FALSE(u.row(a) == u.row(b));
    for (int a = 0; a < 4; ++a) ++index[{u(a, 0), u(a, 1)}];
  }
  // each draw is one of K = 4 picks, so a candidate appears with probability K / P per reset
  for (const auto& [pos, n] : index) {
    const double freq = static_cast<double>(n) / (4.0 * resets);
    CHECK(freq == doctest::Approx(1.0 / 40.0).epsilon(0.05));
  }
}

TEST_CASE("reset determinism and state layout") {
  const Environment e = make_env();
  CHECK(e.state_dim() == 260);
  CHECK(e.action_dim() == 64);
  Rng a1(5), b1(6), a2(5), b2(6);
  const Episode x = e.reset(a1, b1);
  const Episode y = e.reset(a2, b2);
  CHECK(x.state == y.state);
  CHECK(x.state.allFinite());

  const auto& c = x.ctx;
  const int N = 16, M = 4, K = 4;
  CHECK(x.state.head(K) == c.d2);
  CHECK(x.state(K) == c.H1_est(0, 0).real());
  CHECK(x.state(K + 1) == c.H1_est(1, 0).real());
  CHECK(x.state(K + N) == c.H1_est(0, 1).real());
  CHECK(x.state(K + N * M) == c.H1_est(0, 0).imag());
  CHECK(x.state(K + 2 * N * M + N + 2) == c.H2_est(2, 1).real());
  CHECK(x.state(K + 2 * N * M + N * K + 5) == c.H2_est(5, 0).imag());

  // BS-RIS LoS part is fixed across episodes, NLoS is not
  Rng a3(7), b3(8);
  const Episode z = e.reset(a3, b3);
  CHECK(z.ctx.beta1 == x.ctx.beta1);
  CHECK(z.ctx.H1_nlos != x.ctx.H1_nlos);
}

TEST_CASE("safety projection examples") {
  CMatrix G(2, 2);
  G << cplx(1, 1), cplx(0, 2), cplx(-1, 0), cplx(1, -1);
  const double p_max = 0.25 * G.squaredNorm();
  RMatrix phi(2, 2);
  phi << 3, 4, 0, 0;
  const auto a = safety_project(G, phi, p_max);
  CHECK((a.G - 0.5 * G).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(a.phi(0) - cplx(0.6, 0.8)) < 1e-15);
  CHECK(a.phi(1) == cplx(1.0, 0.0));
  CHECK(a.fallback_rows == 1);

  const auto inside = safety_project(0.1 * G, phi, 1.0);
  CHECK(inside.G == 0.1 * G);
}

TEST_CASE("action decode / encode") {
  const ActionLayout L{4, 16, 4};
  Rng rng(3);
  RVector raw(L.dim());
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = standard_normal(rng);
  const auto d = L.decode(raw);
  CHECK(L.encode(d.G_raw, d.phi_raw) == raw);
  CHECK_THROWS_AS(L.decode(RVector::Zero(63)), DimensionError);

  const auto zero = L.decode(RVector::Zero(L.dim()));
  CHECK(zero.G_raw.norm() == 0.0);
  const ActionMapper mapper(4, 16, 4, 1.0);
  CHECK(mapper.project(RVector::Zero(64)).fallback_rows == 16);

  // one coordinate -> one entry
  for (int i = 0; i < L.dim(); ++i) {
    RVector p = raw;
    p(i) += 0.5;
    const auto e = L.decode(p);
    const int changed_g = static_cast<int>(((e.G_raw - d.G_raw).array() != cplx(0.0, 0.0)).count());
    const int changed_phi = static_cast<int>(((e.phi_raw - d.phi_raw).array() != 0.0).count());
    CHECK(changed_g + changed_phi == 1);
    if (i < 16) CHECK(e.G_raw(i % 4, i / 4).real() != d.G_raw(i % 4, i / 4).real());
    else if (i < 32) CHECK(e.G_raw((i - 16) % 4, (i - 16) / 4).imag() != d.G_raw((i - 16) % 4, (i - 16) / 4).imag());
    else if (i < 48) CHECK(e.phi_raw(i - 32, 0) != d.phi_raw(i - 32, 0));
    else CHECK(e.phi_raw(i - 48, 1) != d.phi_raw(i - 48, 1));
  }
}

TEST_CASE("feasibility over random raw actions") {
  const ActionMapper mapper(4, 16, 4, 1.0);
  Rng rng(9);
  for (int i = 0; i < 20000; ++i) {
    RVector x(64);
    const double scale = std::exp(standard_normal(rng) * 3.0);
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = standard_normal(rng) * scale;
    const auto a = mapper.project(x);
    CHECK(a.G.squaredNorm() <= 1.0 + 1e-9);
    CHECK((a.phi.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("safety layer Jacobian matches central differences") {
  const ActionMapper mapper(4, 16, 4, 1.0);
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const RVector x = oracle::smooth_raw_action(mapper, rng);
    const RMatrix fd = oracle::fd_feature_jacobian(mapper, x, 1e-5);
    const RMatrix an = oracle::vjp_jacobian(mapper, x);
    CHECK((fd - an).norm() / an.norm() < 1e-4);
  }
  // beamformer-only mapper
  Rng pr(2);
  CVector phi(16);
  for (int n = 0; n < 16; ++n) phi(n) = std::polar(1.0, 0.3 * n);
  const ActionMapper bf(4, 16, 4, 1.0, phi);
  CHECK(bf.raw_dim() == 32);
  const RVector x = oracle::smooth_raw_action(bf, rng);
  CHECK((oracle::fd_feature_jacobian(bf, x, 1e-5) - oracle::vjp_jacobian(bf, x)).norm() < 1e-6);
  CHECK(bf.project(x).phi == phi);
}

TEST_CASE("Monte Carlo reward") {
  Rng rng(21);
  const Environment ideal = make_env(UncertaintyConfig{0.0, 1.0, 1});
  Rng p(1), n(2);
  const Episode ep = ideal.reset(p, n);
  RVector raw(64);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = standard_normal(rng);
  const auto act = ideal.mapper().project(raw);

  // collapse: S = 1, no uncertainty
  Rng j(3), c(4);
  const auto r = monte_carlo_reward(ideal.downlink(), ep.ctx, act.G, act.phi, ideal.uncertainty(), j, c);
  const double direct = channel::throughput(channel::effective_channel(ep.ctx.H2_est, act.phi, ep.ctx.H1_est), act.G,
                                            ideal.downlink().cfg.sigma_n2());
  CHECK(r.reward == doctest::Approx(direct).epsilon(1e-12));

  // seed invariance without uncertainty
  Rng j2(99), c2(98);
  CHECK(ideal.step(ep.ctx, raw, j2, c2).reward == r.reward);

  // mean of the retained samples, determinism, non-negativity
  const UncertaintyConfig u{deg_to_rad(5.0), 0.8, 6};
  const Environment noisy = make_env(u);
  Rng ja(5), ca(6), jb(5), cb(6);
  const auto s1 = noisy.step(ep.ctx, raw, ja, ca);
  const auto s2 = noisy.step(ep.ctx, raw, jb, cb);
  CHECK(s1.reward == s2.reward);
  REQUIRE(s1.per_sample.size() == 6);
  double m = 0.0;
  for (double v : s1.per_sample) {
    CHECK(v >= 0.0);
    m += v;
  }
  CHECK(s1.reward == doctest::Approx(m / 6.0).epsilon(1e-15));
  CHECK(s1.done);
}

TEST_CASE("reward variance scales as 1/S") {
  Rng rng(31);
  const UncertaintyConfig base{deg_to_rad(8.0), 0.6, 1};
  const Environment e = make_env(base);
  Rng p(1), n(2);
  const Episode ep = e.reset(p, n);
  RVector raw(64);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = standard_normal(rng);
  const auto act = e.mapper().project(raw);
  std::vector<double> log_s, log_v;
  Rng j(7), c(8);
  for (int S : {1, 4, 16, 64}) {
    UncertaintyConfig u = base;
    u.samples = S;
    std::vector<double> rewards;
    for (int rep = 0; rep < 400; ++rep)
      rewards.push_back(monte_carlo_reward(e.downlink(), ep.ctx, act.G, act.phi, u, j, c).reward);
    log_s.push_back(std::log(static_cast<double>(S)));
    log_v.push_back(std::log(variance(rewards)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    mx += log_s[i] / 4;
    my += log_v[i] / 4;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxy += (log_s[i] - mx) * (log_v[i] - my);
    sxx += (log_s[i] - mx) * (log_s[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(-1.0).epsilon(0.15));
}

TEST_CASE("reward unbiased in S") {
  // z-score of (mean of 1000 S = 6 rewards) - (one S = 600 reward) over
  // independent instances: at most one in ten may leave 2 standard errors
  const Environment e = make_env(UncertaintyConfig{deg_to_rad(6.0), 0.7, 6});
  int outside = 0;
  double z_sum = 0.0;
  const int instances = 10;
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(41 + inst), p(3 + inst), n(4 + inst);
    const Episode ep = e.reset(p, n);
    RVector raw(64);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = standard_normal(rng);
    const auto act = e.mapper().project(raw);
    Rng j(1 + 10 * inst), c(2 + 10 * inst);
    std::vector<double> small;
    for (int i = 0; i < 1000; ++i)
      small.push_back(monte_carlo_reward(e.downlink(), ep.ctx, act.G, act.phi, e.uncertainty(), j, c).reward);
    UncertaintyConfig big = e.uncertainty();
    big.samples = 600;
    const double large = monte_carlo_reward(e.downlink(), ep.ctx, act.G, act.phi, big, j, c).reward;
    double m = 0.0;
    for (double v : small) m += v / 1000.0;
    // standard error of the difference: the S = 6 sample sd scaled to each estimator
    const double se = std::sqrt(variance(small)) * std::sqrt(1.0 / 1000.0 + 6.0 / 600.0);
    const double z = (m - large) / se;
    if (std::abs(z) > 2.0) ++outside;
    z_sum += z;
  }
  CHECK(outside <= 1);
  CHECK(std::abs(z_sum / std::sqrt(static_cast<double>(instances))) < 3.0);
}

TEST_CASE("rewards are uncorrelated across episodes") {
  const Environment e = make_env(UncertaintyConfig{deg_to_rad(3.0), 0.9, 6});
  RngStreams s(77);
  std::vector<double> r;
  for (int i = 0; i < 10000; ++i) {
    const Episode ep = e.reset(s.placement, s.nlos);
    RVector raw(64);
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) = standard_normal(s.exploration);
    r.push_back(e.step(ep.ctx, raw, s.jitter, s.csi).reward);
  }
  double m = 0.0;
  for (double v : r) m += v / static_cast<double>(r.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    den += (r[i] - m) * (r[i] - m);
    if (i + 1 < r.size()) num += (r[i] - m) * (r[i + 1] - m);
  }
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("state standardisation") {
  Environment e = make_env();
  Rng a(1), b(2);
  e.fit_standardizer(3000, a, b);
  CHECK(e.scaling() == StateScaling::standardize);
  Rng p(3), n(4);
  RVector mean = RVector::Zero(e.state_dim()), sq = RVector::Zero(e.state_dim());
  for (int i = 0; i < 3000; ++i) {
    const RVector s = e.reset(p, n).state;
    mean += s / 3000.0;
    sq += s.cwiseAbs2() / 3000.0;
  }
  CHECK(mean.cwiseAbs().maxCoeff() < 0.15);
  CHECK(((sq - mean.cwiseAbs2()).array() - 1.0).abs().maxCoeff() < 0.2);
}
