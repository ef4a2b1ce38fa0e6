#pragma once

#include <cstdint>
#include <random>

#include "uavris/types.hpp"

namespace uavris {

using Rng = std::mt19937_64;

/// Seeds a generator from a master seed and a stream tag so that streams
/// derived from the same master seed are statistically independent.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

/// splitmix64 finalizer, used to derive per-episode seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
  placement = 1,
  nlos = 2,
  jitter = 3,
  csi = 4,
  exploration = 5,
  replay = 6,
  init = 7,
  pool = 8,
  phases = 9,
};

/// Independently seedable generators for every source of randomness.
struct RngStreams {
  Rng placement;
  Rng nlos;
  Rng jitter;
  Rng csi;
  Rng exploration;
  Rng replay;
  Rng init;

  explicit RngStreams(std::uint64_t seed)
      : placement(make_stream(seed, static_cast<std::uint64_t>(Stream::placement))),
        nlos(make_stream(seed, static_cast<std::uint64_t>(Stream::nlos))),
        jitter(make_stream(seed, static_cast<std::uint64_t>(Stream::jitter))),
        csi(make_stream(seed, static_cast<std::uint64_t>(Stream::csi))),
        exploration(make_stream(seed, static_cast<std::uint64_t>(Stream::exploration))),
        replay(make_stream(seed, static_cast<std::uint64_t>(Stream::replay))),
        init(make_stream(seed, static_cast<std::uint64_t>(Stream::init))) {}
};

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

/// CN(0, variance): independent real and imaginary parts, each variance/2.
inline cplx complex_normal(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
  const double re = dist(rng);
  const double im = dist(rng);
  return {re, im};
}

inline CMatrix complex_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                                     double variance = 1.0) {
  CMatrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = complex_normal(rng, variance);
  return out;
}

}  // namespace uavris
