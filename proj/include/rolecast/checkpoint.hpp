// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory format: manifest.json (format version, config,
// layout, role records, matrix inventory with shapes and content digests)
// plus one little-endian row-major double binary per matrix. Saves are
// atomic (write to a temp directory, then rename); loads verify every
// digest and reject tampering.
#pragma once

#include <string>

#include "rolecast/agent.hpp"

namespace rolecast {

inline constexpr int kCheckpointFormatVersion = 1;

struct ManifestSummary {
    std::string directory;
    std::size_t matrices = 0;
    std::size_t roles = 0;
};

ManifestSummary save_checkpoint(const AgentState& state, const std::string& dir);
AgentState load_checkpoint(const std::string& dir);

// Digest over every matrix in the state; equal states have equal digests.
std::uint64_t state_digest(const AgentState& state);

}  // namespace rolecast
