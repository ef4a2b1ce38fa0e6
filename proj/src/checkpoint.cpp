#include "uavris/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

namespace uavris::harness {

namespace {

constexpr std::array<char, 8> kMagic{'U', 'R', 'I', 'S', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error(fmt::format("{}: truncated", path));
  return v;
}

std::vector<const drl::Mlp*> networks(const drl::Agent& agent) {
  std::vector<const drl::Mlp*> nets{&agent.actor().net};
  for (const auto& c : agent.critics()) nets.push_back(&c.net);
  return nets;
}

}  // namespace

void save_checkpoint(const std::string& path, const drl::Agent& agent, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write checkpoint '{}'", path));
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, config_hash);
  const auto nets = networks(agent);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(nets.size()));
  for (const auto* net : nets) {
    const auto dims = net->dims();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const RVector flat = net->flatten();
    put<std::uint64_t>(out, static_cast<std::uint64_t>(flat.size()));
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error(fmt::format("error writing checkpoint '{}'", path));
}

void load_checkpoint(const std::string& path, drl::Agent& agent, std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("missing checkpoint '{}'", path));
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error(fmt::format("{}: not a checkpoint", path));
  if (const auto v = get<std::uint32_t>(in, path); v != kCheckpointVersion)
    throw std::runtime_error(fmt::format("{}: unsupported version {}", path, v));
  if (const auto h = get<std::uint64_t>(in, path); h != expected_hash)
    throw std::runtime_error(fmt::format("{}: config hash {:016x} does not match {:016x}", path, h, expected_hash));

  std::vector<drl::Mlp*> nets{&agent.actor().net};
  for (auto& c : agent.critics()) nets.push_back(&c.net);
  if (get<std::uint32_t>(in, path) != nets.size())
    throw std::runtime_error(fmt::format("{}: network count mismatch", path));
  for (auto* net : nets) {
    const auto n_dims = get<std::uint32_t>(in, path);
    std::vector<int> dims(n_dims);
    for (auto& d : dims) d = static_cast<int>(get<std::uint32_t>(in, path));
    if (dims != net->dims()) throw std::runtime_error(fmt::format("{}: network shape mismatch", path));
    const auto count = get<std::uint64_t>(in, path);
    if (count != net->parameter_count()) throw std::runtime_error(fmt::format("{}: parameter count mismatch", path));
    RVector flat(static_cast<Eigen::Index>(count));
    if (!in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double))))
      throw std::runtime_error(fmt::format("{}: truncated", path));
    net->assign(flat);
  }
}

}  // namespace uavris::harness
