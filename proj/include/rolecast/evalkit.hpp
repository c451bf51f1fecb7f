// SPDX-License-Identifier: Apache-2.0
//
// Quantitative proxies for role fidelity that need no external judge:
// heldout perplexity grids, gating accuracy over canonical prompts and
// paraphrases, forgetting deltas, and transfer/stability scoring of
// scripted conversations.
#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rolecast/agent.hpp"
#include "rolecast/backbone.hpp"
#include "rolecast/corpus.hpp"
#include "rolecast/gating.hpp"

namespace rolecast {

// exp of the mean next-token cross-entropy under the given activation.
double perplexity(const ModelState& model, const AdapterSet* adapters,
                  const Activation& act, const std::vector<TokenSequence>& heldout);

struct PerplexityGrid {
    std::vector<std::string> roles;  // row order
    Matrix values;                   // roles x blocks
    std::vector<double> base;        // no-adapter perplexity per role
};

PerplexityGrid perplexity_grid(const ModelState& model, const AdapterSet& adapters,
                               const std::vector<RoleDataset>& datasets);

struct LabeledPrompt {
    std::string text;
    int expected_role = -1;
    bool canonical = false;
};

double gating_accuracy(const RoleRegistry& registry, const GateState& gate,
                       std::span<const LabeledPrompt> prompts);

// Canonical prompt per role plus seeded paraphrases built from the
// character's name, exclusive tokens and signature phrases.
std::vector<LabeledPrompt> make_gating_prompts(const RoleRegistry& registry,
                                               const std::vector<CharacterSpec>& characters,
                                               std::size_t paraphrases_per_role,
                                               std::uint64_t seed);

struct ForgettingDelta {
    std::string role;
    double before = 0.0;
    double after = 0.0;
    double relative = 0.0;
};

// Relative diagonal deltas between two grids over the same roles.
std::vector<ForgettingDelta> forgetting_report(const PerplexityGrid& before,
                                               const PerplexityGrid& after);

struct TransferStability {
    double transfer = 1.0;
    double stability = 1.0;
};

// transfer: fraction of switch turns routed to the newly expected role.
// stability: fraction of non-switch turns where the role persisted and the
// reply shows at least one of the role's exclusive tokens. Vacuous
// fractions default to 1.
TransferStability transfer_stability(
    std::span<const TranscriptRow> transcript,
    const std::map<std::string, std::set<std::string>>& style_lexicon);

struct EvalReport {
    std::string notes;
    PerplexityGrid grid;
    double gating_accuracy_canonical = -1.0;
    double gating_accuracy_all = -1.0;
    std::vector<ForgettingDelta> partitioned_forgetting;
    std::vector<ForgettingDelta> baseline_forgetting;
    double transfer_score = -1.0;
    double stability_score = -1.0;
    std::string config_digest;
    std::uint64_t seed = 0;
};

std::string eval_report_to_json(const EvalReport& report);
std::string grid_to_csv(const PerplexityGrid& grid);

}  // namespace rolecast
