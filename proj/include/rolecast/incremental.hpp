// SPDX-License-Identifier: Apache-2.0
//
// Lifelong role addition. Fusion derives a new role as a gate-weighted
// combination of existing blocks without touching any weights; expansion
// grows the adapter matrices and the gate by one block, trains only the
// new block, and leaves every old block byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rolecast/backbone.hpp"
#include "rolecast/gating.hpp"
#include "rolecast/lora.hpp"
#include "rolecast/lora_train.hpp"

namespace rolecast {

enum class IncrementalStrategy { fusion, expansion };

struct IncrementalReport {
    IncrementalStrategy strategy = IncrementalStrategy::fusion;
    int new_role_index = -1;
    std::vector<double> fusion_weights;  // fusion only
    bool blocks_frozen_verified = false;
    std::size_t gate_cols_before = 0;
    std::size_t gate_cols_after = 0;
};

// Data-free: w_j = softmax(W^T e_j) from the new profile's embedding; the
// role is registered with a fusion activation and no adapter weight
// changes.
std::pair<int, ProbVector> fuse_role(RoleRegistry& registry, const GateState& gate,
                                     const AdapterSet& adapters,
                                     const RoleProfile& profile);

struct ExpandOptions {
    TrainOptions lora;
    GateTrainOptions gate;
    double lora_init_stddev = 0.02;
    std::uint64_t seed = 0;
};

// Grows every adapter matrix by one block and the gate by one column,
// trains only the new block on the corpus, and retrains the gate on all
// block roles from a warm start. Old blocks must stay byte-identical and
// old canonical routing must stay exact; violations raise TrainingError.
int expand_role(RoleRegistry& registry, GateState& gate, AdapterSet& adapters,
                const ModelState& model, const RoleProfile& profile,
                const std::vector<TokenSequence>& corpus, const ExpandOptions& options);

struct AddRoleOptions {
    IncrementalStrategy strategy = IncrementalStrategy::fusion;
    ExpandOptions expand;
};

// Wrapper that runs either strategy and verifies the frozen-block digests.
IncrementalReport add_role(RoleRegistry& registry, GateState& gate,
                           AdapterSet& adapters, const ModelState& model,
                           const RoleProfile& profile,
                           const std::vector<TokenSequence>& corpus,
                           const AddRoleOptions& options);

}  // namespace rolecast
