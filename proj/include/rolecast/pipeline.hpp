// SPDX-License-Identifier: Apache-2.0
//
// Phase orchestration shared by the CLI and the test suites: synthetic
// world construction, the pre-tuning pipeline (backbone, role blocks,
// registry, gate), the shared-baseline comparator, and report assembly.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rolecast/agent.hpp"
#include "rolecast/config.hpp"
#include "rolecast/corpus.hpp"
#include "rolecast/evalkit.hpp"
#include "rolecast/incremental.hpp"

namespace rolecast {

struct SyntheticWorld {
    Vocabulary vocab;
    // Characters 1..num_roles plus the reserved incremental character.
    std::vector<CharacterSpec> characters;
    std::vector<RoleDataset> datasets;  // aligned with characters
    std::vector<std::string> filler_lexicon;
};

SyntheticWorld build_world(const Config& config);

const CharacterSpec& incremental_character(const SyntheticWorld& world);
const RoleDataset& incremental_dataset(const SyntheticWorld& world);

RoleProfile profile_for(const CharacterSpec& spec);
// Exclusive-token sets keyed by role name, for style-presence scoring.
std::map<std::string, std::set<std::string>> style_lexicon(const SyntheticWorld& world);

// Backbone pre-training, one block per role, registration, gate training.
AgentState pretrain_pipeline(const Config& config, const SyntheticWorld& world);
AgentState pretrain_pipeline(const Config& config);

// Fresh shared-baseline adapter set for the same backbone.
AdapterSet make_baseline_adapters(const Config& config, const ModelState& model);

struct EvalSelection {
    bool grid = false;
    bool gating = false;
    bool transfer = false;
    bool forgetting = false;
    static EvalSelection all();
};

EvalReport run_eval(const AgentState& state, const SyntheticWorld& world,
                    const EvalSelection& selection);

}  // namespace rolecast
