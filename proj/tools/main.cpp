// SPDX-License-Identifier: Apache-2.0
//
// rolecast command line: pretrain -> chat/add-role -> eval, plus the
// gradient-check harness. Exit codes: 0 success, 2 invalid input,
// 3 training failure, 4 I/O or digest failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rolecast/agent.hpp"
#include "rolecast/checkpoint.hpp"
#include "rolecast/config.hpp"
#include "rolecast/errors.hpp"
#include "rolecast/evalkit.hpp"
#include "rolecast/gradcheck.hpp"
#include "rolecast/incremental.hpp"
#include "rolecast/pipeline.hpp"
#include "rolecast/rng.hpp"

namespace {

using namespace rolecast;

RoleProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("profile: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("profile: " + std::string(e.what()));
    }
    if (!j.contains("name") || !j["name"].is_string() || !j.contains("profile") ||
        !j["profile"].is_string())
        throw InvalidArgument("profile: expected {name, profile[, canonical_prompt]}");
    RoleProfile profile;
    profile.name = j["name"].get<std::string>();
    profile.profile_text = j["profile"].get<std::string>();
    if (j.contains("canonical_prompt"))
        profile.canonical_prompt = j["canonical_prompt"].get<std::string>();
    return profile;
}

// --data accepts either the corpus dump format ({role, tokens, split}) or
// the dialogue format ({role, turns}); sniffed from the first object.
std::vector<TokenSequence> load_role_data(const std::string& path,
                                          const Vocabulary& vocab,
                                          const std::string& role) {
    std::ifstream in(path);
    if (!in) throw IoError("data: cannot open " + path);
    std::string first_line;
    while (std::getline(in, first_line))
        if (first_line.find_first_not_of(" \t\r") != std::string::npos) break;
    if (first_line.empty()) throw InvalidArgument("data: " + path + " is empty");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(first_line);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("data: line 1: " + std::string(e.what()));
    }

    std::vector<TokenSequence> sequences;
    if (j.contains("turns")) {
        auto corpora = load_dialogues(path, vocab);
        auto it = corpora.find(role);
        if (it == corpora.end())
            throw InvalidArgument("data: no dialogues for role '" + role + "' in " + path);
        sequences = it->second.sequences;
    } else {
        auto dump = load_corpus_dump(path, vocab);
        auto it = dump.find(role);
        if (it == dump.end())
            throw InvalidArgument("data: no sequences for role '" + role + "' in " + path);
        sequences = it->second.train.sequences;
    }
    if (sequences.empty())
        throw InvalidArgument("data: role '" + role + "' has no training sequences");
    return sequences;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

int cmd_pretrain(const std::string& config_path, const std::string& out_dir) {
    const Config config = load_config(config_path);
    const SyntheticWorld world = build_world(config);
    const AgentState state = pretrain_pipeline(config, world);
    const ManifestSummary summary = save_checkpoint(state, out_dir);
    nlohmann::json j;
    j["checkpoint"] = summary.directory;
    j["matrices"] = summary.matrices;
    j["roles"] = summary.roles;
    j["state_digest"] = digest_hex(state_digest(state));
    std::cout << j.dump(2) << std::endl;
    return 0;
}

int cmd_add_role(const std::string& ckpt, const std::string& profile_path,
                 const std::string& strategy_name, const std::string& data_path,
                 const std::string& out_dir) {
    AgentState state = load_checkpoint(ckpt);
    const RoleProfile profile = load_profile(profile_path);

    AddRoleOptions options;
    if (strategy_name == "fusion") {
        options.strategy = IncrementalStrategy::fusion;
    } else if (strategy_name == "expansion") {
        options.strategy = IncrementalStrategy::expansion;
    } else {
        throw InvalidArgument("add-role: strategy must be fusion or expansion");
    }

    std::vector<TokenSequence> corpus;
    if (options.strategy == IncrementalStrategy::expansion) {
        if (data_path.empty())
            throw InvalidArgument("add-role: expansion requires --data");
        corpus = load_role_data(data_path, state.model.vocab, profile.name);
    }

    options.expand.lora.learning_rate = state.config.learning_rate;
    options.expand.lora.epochs = state.config.epochs;
    options.expand.gate.learning_rate = state.config.gate_learning_rate;
    options.expand.gate.epochs = state.config.gate_epochs;
    options.expand.gate.max_retries = state.config.gate_max_retries;
    options.expand.gate.seed = state.config.seed_for("expand-gate");
    options.expand.lora_init_stddev = state.config.lora_init_stddev;
    options.expand.seed = state.config.seed_for("expand");

    const IncrementalReport report = add_role(state.registry, state.gate, state.adapters,
                                              state.model, profile, corpus, options);
    save_checkpoint(state, out_dir);

    nlohmann::json j;
    j["strategy"] = strategy_name;
    j["new_role_index"] = report.new_role_index;
    j["blocks_frozen_verified"] = report.blocks_frozen_verified;
    j["gate_columns"] = {{"before", report.gate_cols_before},
                         {"after", report.gate_cols_after}};
    if (!report.fusion_weights.empty()) j["fusion_weights"] = report.fusion_weights;
    j["layout"] = {{"capacity", state.adapters.layout.capacity},
                   {"partial_rank", state.adapters.layout.partial_rank},
                   {"total_rank", state.adapters.layout.total_rank()}};
    j["checkpoint"] = out_dir;
    std::cout << j.dump(2) << std::endl;
    return 0;
}

int cmd_chat(const std::string& ckpt, const std::string& script_path,
             const std::string& out_path, std::size_t max_tokens) {
    const AgentState state = load_checkpoint(ckpt);
    if (!script_path.empty()) {
        const auto script = load_script(script_path);
        const auto transcript = run_script(state, script, max_tokens);
        if (!out_path.empty()) {
            save_transcript(out_path, transcript);
        } else {
            for (const auto& row : transcript) {
                nlohmann::json j;
                j["turn"] = row.turn_index;
                j["user_text"] = row.user_text;
                j["agent_text"] = row.agent_text;
                j["routed_role"] = row.routing.role_name;
                j["best_cosine"] = row.routing.best_cosine;
                j["switched"] = row.routing.switched;
                std::cout << j.dump() << '\n';
            }
        }
        return 0;
    }

    // Interactive loop: one user line per turn, agent reply tagged with the
    // active role.
    Conversation conversation;
    std::string line;
    std::cout << "rolecast chat — empty line or EOF ends the session" << std::endl;
    while (std::getline(std::cin, line)) {
        if (line.empty()) break;
        const DialogueTurn turn = respond(state, line, conversation, max_tokens);
        std::cout << "[" << turn.routing->role_name << "] " << turn.text << std::endl;
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& suite,
             const std::string& out_path) {
    const AgentState state = load_checkpoint(ckpt);
    const SyntheticWorld world = build_world(state.config);

    EvalSelection selection;
    if (suite == "all") {
        selection = EvalSelection::all();
    } else if (suite == "grid") {
        selection.grid = true;
    } else if (suite == "gating") {
        selection.gating = true;
    } else if (suite == "transfer") {
        selection.transfer = true;
    } else {
        throw InvalidArgument("eval: suite must be all, grid, gating or transfer");
    }

    const EvalReport report = run_eval(state, world, selection);
    const std::string json_text = eval_report_to_json(report);
    write_text_file(out_path, json_text);
    if (selection.grid) {
        std::filesystem::path csv_path(out_path);
        csv_path.replace_extension(".grid.csv");
        write_text_file(csv_path.string(), grid_to_csv(report.grid));
    }
    std::cout << json_text << std::endl;
    return 0;
}

int cmd_gradcheck(const std::string& config_path) {
    Config config;
    if (!config_path.empty()) config = load_config(config_path);
    const auto results = run_gradient_checks(20, 1e-5, config.seed_for("gradcheck"));
    double worst = worst_relative_error(results);
    std::map<std::string, double> per_component;
    for (const auto& r : results)
        per_component[r.component] = std::max(per_component[r.component],
                                              r.max_relative_error);
    nlohmann::json j;
    for (const auto& [component, err] : per_component) j["components"][component] = err;
    j["worst_relative_error"] = worst;
    j["seeds"] = 20;
    j["threshold"] = 1e-4;
    j["pass"] = worst < 1e-4;
    std::cout << j.dump(2) << std::endl;
    if (worst >= 1e-4) throw TrainingError("gradcheck: worst relative error " +
                                           std::to_string(worst) + " exceeds 1e-4");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-character role-play agent with rank-partitioned adapters"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt, profile_path, data_path, strategy;
    std::string script_path, out_path, suite = "all";
    std::size_t max_tokens = 16;

    auto* pretrain = app.add_subcommand("pretrain", "Build the base model, role blocks and gate");
    pretrain->add_option("--config", config_path, "Config JSON")->required();
    pretrain->add_option("--out", out_dir, "Checkpoint directory to create")->required();

    auto* add = app.add_subcommand("add-role", "Add a role by fusion or expansion");
    add->add_option("--ckpt", ckpt, "Input checkpoint")->required();
    add->add_option("--profile", profile_path, "Role profile JSON")->required();
    add->add_option("--strategy", strategy, "fusion|expansion")->required();
    add->add_option("--data", data_path, "Role corpus JSONL (expansion)");
    add->add_option("--out", out_dir, "Checkpoint directory to create")->required();

    auto* chat = app.add_subcommand("chat", "Scripted or interactive conversation");
    chat->add_option("--ckpt", ckpt, "Checkpoint")->required();
    chat->add_option("--script", script_path, "Script JSONL");
    chat->add_option("--out", out_path, "Transcript JSONL output");
    chat->add_option("--max-tokens", max_tokens, "Reply length cap");

    auto* eval = app.add_subcommand("eval", "Evaluation suites");
    eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
    eval->add_option("--suite", suite, "all|grid|gating|transfer");
    eval->add_option("--out", out_path, "Report JSON output")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gradcheck->add_option("--config", config_path, "Config JSON (seeds only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 2}}.dump()
                  << std::endl;
        return 2;
    }

    try {
        if (pretrain->parsed()) return cmd_pretrain(config_path, out_dir);
        if (add->parsed()) return cmd_add_role(ckpt, profile_path, strategy, data_path, out_dir);
        if (chat->parsed()) return cmd_chat(ckpt, script_path, out_path, max_tokens);
        if (eval->parsed()) return cmd_eval(ckpt, suite, out_path);
        if (gradcheck->parsed()) return cmd_gradcheck(config_path);
    } catch (const rolecast::Error& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", e.exit_code()}}.dump()
                  << std::endl;
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"exit_code", 1}}.dump()
                  << std::endl;
        return 1;
    }
    return 0;
}
