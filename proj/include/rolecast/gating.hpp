// SPDX-License-Identifier: Apache-2.0
//
// Role registry and gating network. Profiles embed through seeded
// feature hashing into unit vectors; the registry keeps an append-only
// role embedding matrix; routing retrieves the closest row by cosine and
// the linear gate turns the retrieved embedding into block weights.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rolecast/lora.hpp"
#include "rolecast/numerics.hpp"

namespace rolecast {

struct RoleProfile {
    std::string name;
    std::string profile_text;
    // The meta-prompt instantiation; when empty it is filled from the
    // template at registration.
    std::string canonical_prompt;
};

std::string canonical_prompt_for(const std::string& name);

// Deterministic feature-hashing bag of words, L2-normalized; empty text
// maps to the first basis vector.
std::vector<double> embed_profile(const std::string& text, std::size_t d_embed,
                                  std::uint64_t seed);

// Tokenization used by the embedder: lowercase, whitespace split, edge
// punctuation stripped (so "name." and "name" hash identically).
std::vector<std::string> embed_tokenize(const std::string& text);

struct GateState {
    Matrix weights;  // d_embed x n_blocks

    std::size_t block_count() const { return weights.cols; }
    // softmax(W^T e), the contribution weights over blocks.
    ProbVector block_weights(std::span<const double> embedding) const;
    void append_block_column();
};

struct RoleRecord {
    RoleProfile profile;
    Activation activation;  // block or fusion
};

struct RoleRegistry {
    std::size_t d_embed = 16;
    std::uint64_t embed_seed = 0;
    std::vector<RoleRecord> roles;
    Matrix embeddings;  // n_roles x d_embed, append-only

    static RoleRegistry create(std::size_t d_embed, std::uint64_t embed_seed);
    std::optional<int> find(const std::string& name) const;  // case-insensitive
    bool empty() const { return roles.empty(); }
};

// Appends the profile embedding row and stores the activation. The gate is
// never grown here; block activations must reference an existing column.
int register_role(RoleRegistry& registry, const GateState& gate,
                  const RoleProfile& profile, const Activation& activation);

struct RouteResult {
    int role_index = -1;
    std::vector<double> cosines;  // per registry row
    double best_cosine = 0.0;
    ProbVector gate_weights;      // over blocks, from the retrieved embedding
    int gate_argmax = -1;
    Activation activation;
    // For block roles: whether the gate argmax names the stored block.
    // Retrieval wins on disagreement; the flag records it.
    bool gate_agrees = true;
};

RouteResult route(const RoleRegistry& registry, const GateState& gate,
                  const std::string& instruction);

struct GateExample {
    std::vector<double> embedding;
    int target_block = 0;
};

struct GateTrainOptions {
    double learning_rate = 0.5;
    std::size_t epochs = 400;
    int max_retries = 5;
    std::uint64_t seed = 0;
    double init_stddev = 0.02;
    // Start from the current weights on the first attempt (used when the
    // gate grows a column and old routing must be preserved).
    bool warm_start = false;
};

// Per-example SGD on cross-entropy of softmax(W^T e) vs the target block.
// Succeeds only when every example's argmax matches its target; reinits
// with a fresh seed up to max_retries times, then fails.
void train_gate(GateState& gate, std::span<const GateExample> examples,
                const GateTrainOptions& options);

// One clean example per block role plus seeded token-dropout perturbations
// of its profile text.
std::vector<GateExample> make_gate_examples(const RoleRegistry& registry,
                                            std::size_t perturbations,
                                            double dropout, std::uint64_t seed);

}  // namespace rolecast
