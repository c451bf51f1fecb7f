// SPDX-License-Identifier: Apache-2.0
//
// The multi-character dialogue loop: meta-prompt parsing, per-turn
// routing with a switch threshold, greedy generation over the adapted
// backbone, and deterministic script replay.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rolecast/backbone.hpp"
#include "rolecast/config.hpp"
#include "rolecast/gating.hpp"
#include "rolecast/lora.hpp"

namespace rolecast {

struct AgentState {
    Config config;
    ModelState model;
    AdapterSet adapters;
    RoleRegistry registry;
    GateState gate;
};

struct ParsedMeta {
    std::string name;
    std::string residual;
};

// Recognizes "I want you to act like {character}" case-insensitively and
// extracts the name; anything else is routed whole by similarity.
std::optional<ParsedMeta> parse_meta_prompt(const std::string& text);

struct RoutingRecord {
    int role_index = -1;
    std::string role_name;
    double best_cosine = 0.0;
    bool switched = false;
    bool gate_agrees = true;
    bool untrained_block = false;  // flagged, not an error
};

struct DialogueTurn {
    enum class Speaker { user, agent };
    Speaker speaker = Speaker::user;
    std::string text;
    std::optional<std::string> implied_role;   // user turns, from the meta prompt
    std::optional<Activation> activation;      // agent turns
    std::optional<RoutingRecord> routing;      // agent turns
};

struct Conversation {
    std::vector<DialogueTurn> turns;
    std::optional<int> current_role;
};

// Routes the user text (switching only past the threshold), generates
// greedily until EOS or max_tokens, and appends both turns.
DialogueTurn respond(const AgentState& agent, const std::string& user_text,
                     Conversation& conversation, std::size_t max_tokens);

struct ScriptTurn {
    std::string text;
    std::optional<std::string> expected_role;
};

struct TranscriptRow {
    std::size_t turn_index = 0;
    std::string user_text;
    std::optional<std::string> expected_role;
    std::string agent_text;
    RoutingRecord routing;
    Activation activation;
};

std::vector<TranscriptRow> run_script(const AgentState& agent,
                                      std::span<const ScriptTurn> script,
                                      std::size_t max_tokens);

// Alternating-role scripts: canonical prompts switch between two roles with
// cue-free filler turns in between.
std::vector<std::vector<ScriptTurn>> generate_transfer_scripts(
    const RoleRegistry& registry, const std::vector<std::string>& filler_lexicon,
    std::size_t count, std::size_t rounds, std::uint64_t seed);

std::vector<ScriptTurn> load_script(const std::string& path);
void save_transcript(const std::string& path, std::span<const TranscriptRow> rows);

}  // namespace rolecast
