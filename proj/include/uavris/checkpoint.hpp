#pragma once

#include <cstdint>
#include <string>

#include "uavris/agent.hpp"

namespace uavris::harness {

/// Binary little-endian layout:
///   "URISCKPT" | u32 version | u64 config hash | u32 network count
///   per network: u32 layer-dim count, u32 dims..., u64 parameter count, f64 parameters
/// Networks are the actor followed by the critics. Optimiser moments are not stored.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const drl::Agent& agent, std::uint64_t config_hash);

/// Loads weights into an agent of matching architecture. Throws
/// std::runtime_error on a missing file, bad magic/version, hash mismatch
/// or shape mismatch.
void load_checkpoint(const std::string& path, drl::Agent& agent, std::uint64_t expected_hash);

}  // namespace uavris::harness
