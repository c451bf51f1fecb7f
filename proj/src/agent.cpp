// SPDX-License-Identifier: Apache-2.0

#include "rolecast/agent.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::optional<ParsedMeta> parse_meta_prompt(const std::string& text) {
    static const std::string prefix = "i want you to act like ";
    const std::string trimmed = trim(text);
    const std::string lower = lowercase(trimmed);
    if (lower.size() <= prefix.size() || lower.compare(0, prefix.size(), prefix) != 0)
        return std::nullopt;

    std::size_t end = prefix.size();
    while (end < trimmed.size() && trimmed[end] != '.' && trimmed[end] != ',' &&
           trimmed[end] != '\n' && trimmed[end] != '!' && trimmed[end] != '?')
        ++end;
    const std::string name = trim(trimmed.substr(prefix.size(), end - prefix.size()));
    if (name.empty()) return std::nullopt;

    ParsedMeta meta;
    meta.name = name;
    if (end < trimmed.size()) meta.residual = trim(trimmed.substr(end + 1));
    return meta;
}

DialogueTurn respond(const AgentState& agent, const std::string& user_text,
                     Conversation& conversation, std::size_t max_tokens) {
    if (max_tokens < 1) throw InvalidArgument("respond: max_tokens must be >= 1");
    const RouteResult routed = route(agent.registry, agent.gate, user_text);

    int active_role;
    bool switched;
    if (!conversation.current_role) {
        active_role = routed.role_index;
        switched = true;
    } else {
        const int current = *conversation.current_role;
        const bool crosses_threshold =
            routed.best_cosine > agent.config.switch_threshold &&
            routed.best_cosine > routed.cosines[static_cast<std::size_t>(current)];
        if (routed.role_index != current && crosses_threshold) {
            active_role = routed.role_index;
            switched = true;
        } else {
            active_role = current;
            switched = false;
        }
    }

    const RoleRecord& record = agent.registry.roles[static_cast<std::size_t>(active_role)];
    const Activation& activation = record.activation;

    RoutingRecord routing;
    routing.role_index = active_role;
    routing.role_name = record.profile.name;
    routing.best_cosine = routed.best_cosine;
    routing.switched = switched;
    routing.gate_agrees = routed.gate_agrees;
    if (activation.kind == Activation::Kind::block)
        routing.untrained_block = !agent.adapters.is_trained(activation.block);

    DialogueTurn user_turn;
    user_turn.speaker = DialogueTurn::Speaker::user;
    user_turn.text = user_text;
    if (auto meta = parse_meta_prompt(user_text)) user_turn.implied_role = meta->name;
    conversation.turns.push_back(user_turn);

    // Flatten the tagged history into token ids, then generate greedily.
    std::vector<int> history;
    for (const auto& turn : conversation.turns) {
        const char* tag = turn.speaker == DialogueTurn::Speaker::user ? "user:" : "agent:";
        const TokenSequence tag_ids = tokenize(tag, agent.model.vocab);
        history.insert(history.end(), tag_ids.ids.begin(), tag_ids.ids.end());
        const TokenSequence text_ids = tokenize(turn.text, agent.model.vocab);
        history.insert(history.end(), text_ids.ids.begin(), text_ids.ids.end());
    }
    {
        const TokenSequence tag_ids = tokenize("agent:", agent.model.vocab);
        history.insert(history.end(), tag_ids.ids.begin(), tag_ids.ids.end());
    }

    std::vector<int> generated;
    for (std::size_t step = 0; step < max_tokens; ++step) {
        std::vector<int> ctx;
        ctx.push_back(Vocabulary::kBos);
        ctx.insert(ctx.end(), history.begin(), history.end());
        if (ctx.size() > agent.model.context_window)
            ctx.erase(ctx.begin(),
                      ctx.end() - static_cast<std::ptrdiff_t>(agent.model.context_window));
        const std::vector<double> logits =
            forward_logits(agent.model, ctx, &agent.adapters, activation);
        const int next = static_cast<int>(sample_next(logits, 0.0, 0));
        if (next == Vocabulary::kEos) break;
        generated.push_back(next);
        history.push_back(next);
    }

    DialogueTurn agent_turn;
    agent_turn.speaker = DialogueTurn::Speaker::agent;
    agent_turn.text = detokenize(generated, agent.model.vocab);
    agent_turn.activation = activation;
    agent_turn.routing = routing;
    conversation.turns.push_back(agent_turn);
    conversation.current_role = active_role;
    return agent_turn;
}

std::vector<TranscriptRow> run_script(const AgentState& agent,
                                      std::span<const ScriptTurn> script,
                                      std::size_t max_tokens) {
    if (script.empty()) throw InvalidArgument("run_script: empty script");
    std::vector<TranscriptRow> rows;
    Conversation conversation;
    for (std::size_t i = 0; i < script.size(); ++i) {
        DialogueTurn turn;
        try {
            turn = respond(agent, script[i].text, conversation, max_tokens);
        } catch (const Error& e) {
            throw Error(e.exit_code(),
                        "run_script: turn " + std::to_string(i) + ": " + e.what());
        }
        TranscriptRow row;
        row.turn_index = i;
        row.user_text = script[i].text;
        row.expected_role = script[i].expected_role;
        row.agent_text = turn.text;
        row.routing = *turn.routing;
        row.activation = *turn.activation;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::vector<ScriptTurn>> generate_transfer_scripts(
    const RoleRegistry& registry, const std::vector<std::string>& filler_lexicon,
    std::size_t count, std::size_t rounds, std::uint64_t seed) {
    if (registry.roles.size() < 2)
        throw InvalidArgument("generate_transfer_scripts: need at least two roles");
    if (filler_lexicon.empty())
        throw InvalidArgument("generate_transfer_scripts: empty filler lexicon");

    std::vector<std::vector<ScriptTurn>> scripts;
    for (std::size_t s = 0; s < count; ++s) {
        RandomStream rng(derive_seed(seed, "transfer-script", s));
        const std::size_t first = rng.uniform_index(registry.roles.size());
        std::size_t second = rng.uniform_index(registry.roles.size() - 1);
        if (second >= first) ++second;

        std::vector<ScriptTurn> script;
        std::size_t active = first;
        for (std::size_t r = 0; r < rounds; ++r) {
            ScriptTurn turn;
            if (r % 2 == 0) {
                // canonical prompt; alternates between the two roles
                active = (r / 2) % 2 == 0 ? first : second;
                turn.text = registry.roles[active].profile.canonical_prompt;
            } else {
                std::string filler;
                const std::size_t words = 4 + rng.uniform_index(3);
                for (std::size_t w = 0; w < words; ++w) {
                    if (w) filler.push_back(' ');
                    filler += filler_lexicon[rng.uniform_index(filler_lexicon.size())];
                }
                turn.text = filler;
            }
            turn.expected_role = registry.roles[active].profile.name;
            script.push_back(std::move(turn));
        }
        scripts.push_back(std::move(script));
    }
    return scripts;
}

std::vector<ScriptTurn> load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_script: cannot open " + path);
    std::vector<ScriptTurn> script;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("load_script: line " + std::to_string(line_no) + ": " +
                                  e.what());
        }
        if (!j.contains("text") || !j["text"].is_string())
            throw InvalidArgument("load_script: line " + std::to_string(line_no) +
                                  ": expected a text field");
        ScriptTurn turn;
        turn.text = j["text"].get<std::string>();
        if (j.contains("expected_role") && !j["expected_role"].is_null())
            turn.expected_role = j["expected_role"].get<std::string>();
        script.push_back(std::move(turn));
    }
    return script;
}

void save_transcript(const std::string& path, std::span<const TranscriptRow> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("save_transcript: cannot open " + path + " for writing");
    for (const auto& row : rows) {
        nlohmann::json j;
        j["turn"] = row.turn_index;
        j["user_text"] = row.user_text;
        j["expected_role"] =
            row.expected_role ? nlohmann::json(*row.expected_role) : nlohmann::json(nullptr);
        j["agent_text"] = row.agent_text;
        j["routed_role"] = row.routing.role_name;
        j["best_cosine"] = row.routing.best_cosine;
        j["switched"] = row.routing.switched;
        j["gate_agrees"] = row.routing.gate_agrees;
        j["untrained_block"] = row.routing.untrained_block;
        if (row.activation.kind == Activation::Kind::block) {
            j["activation"] = {{"type", "block"}, {"block", row.activation.block}};
        } else if (row.activation.kind == Activation::Kind::fusion) {
            j["activation"] = {{"type", "fusion"}, {"weights", row.activation.weights}};
        } else {
            j["activation"] = {{"type", "none"}};
        }
        out << j.dump() << '\n';
    }
}

}  // namespace rolecast
