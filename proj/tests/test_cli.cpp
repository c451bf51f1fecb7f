// SPDX-License-Identifier: Apache-2.0
//
// Drives the installed CLI end to end: pretrain determinism, add-role,
// scripted chat, eval, gradcheck, and the error-exit contract.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "rolecast/checkpoint.hpp"
#include "rolecast/config.hpp"

using namespace rolecast;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "rolecast_cli_test";

int run_cli(const std::string& args, const std::string& stdout_path = "") {
    std::string command = std::string(ROLECAST_CLI_PATH) + " " + args;
    if (!stdout_path.empty()) command += " > " + stdout_path;
    command += " 2> " + (kWork / "stderr.txt").string();
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_small_config(const fs::path& path) {
    Config config;
    config.num_roles = 4;
    config.sequences_per_role = 60;
    config.epochs = 4;
    config.backbone_epochs = 3;
    config.gate_epochs = 300;
    std::ofstream out(path);
    out << config_to_json_text(config);
}

}  // namespace

TEST_CASE("cli pipeline: pretrain, add-role, chat, eval, gradcheck") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const std::string config_path = (kWork / "config.json").string();
    write_small_config(config_path);

    // pretrain twice: determinism at the digest level
    REQUIRE(run_cli("pretrain --config " + config_path + " --out " + (kWork / "ck1").string(),
                    (kWork / "pretrain1.json").string()) == 0);
    REQUIRE(run_cli("pretrain --config " + config_path + " --out " + (kWork / "ck2").string(),
                    (kWork / "pretrain2.json").string()) == 0);
    const auto first = nlohmann::json::parse(slurp(kWork / "pretrain1.json"));
    const auto second = nlohmann::json::parse(slurp(kWork / "pretrain2.json"));
    CHECK(first.at("state_digest") == second.at("state_digest"));
    CHECK(first.at("roles") == 4);

    // add-role fusion: no data needed
    {
        std::ofstream out(kWork / "profile.json");
        out << R"({"name": "Quorrin", "profile": "Quorrin is Quorrin. Quorrin blends voices. Quorrin speaks as Quorrin."})";
    }
    REQUIRE(run_cli("add-role --ckpt " + (kWork / "ck1").string() + " --profile " +
                        (kWork / "profile.json").string() + " --strategy fusion --out " +
                        (kWork / "ck_fused").string(),
                    (kWork / "fusion.json").string()) == 0);
    const auto fusion = nlohmann::json::parse(slurp(kWork / "fusion.json"));
    CHECK(fusion.at("blocks_frozen_verified") == true);
    CHECK(fusion.at("fusion_weights").size() == 4);

    // expansion needs --data; reuse a dumped corpus for the new role name
    const AgentState state = load_checkpoint((kWork / "ck1").string());
    {
        std::ofstream out(kWork / "data.jsonl");
        // ten short sequences in dump format
        for (int i = 0; i < 12; ++i) {
            nlohmann::json j;
            j["role"] = "Quorrin";
            j["split"] = "train";
            j["tokens"] = {state.model.vocab.token(3), state.model.vocab.token(4),
                           state.model.vocab.token(5), state.model.vocab.token(6)};
            out << j.dump() << "\n";
        }
    }
    REQUIRE(run_cli("add-role --ckpt " + (kWork / "ck1").string() + " --profile " +
                        (kWork / "profile.json").string() +
                        " --strategy expansion --data " + (kWork / "data.jsonl").string() +
                        " --out " + (kWork / "ck_expanded").string(),
                    (kWork / "expansion.json").string()) == 0);
    const auto expansion = nlohmann::json::parse(slurp(kWork / "expansion.json"));
    CHECK(expansion.at("layout").at("capacity") == 5);
    CHECK(expansion.at("layout").at("total_rank") == 20);
    CHECK(expansion.at("blocks_frozen_verified") == true);

    // expansion without data is an input error (exit 2)
    CHECK(run_cli("add-role --ckpt " + (kWork / "ck1").string() + " --profile " +
                  (kWork / "profile.json").string() + " --strategy expansion --out " +
                  (kWork / "ck_bad").string()) == 2);

    // chat over a script
    {
        std::ofstream out(kWork / "script.jsonl");
        nlohmann::json j;
        j["text"] = state.registry.roles[0].profile.canonical_prompt;
        j["expected_role"] = state.registry.roles[0].profile.name;
        out << j.dump() << "\n";
    }
    REQUIRE(run_cli("chat --ckpt " + (kWork / "ck1").string() + " --script " +
                        (kWork / "script.jsonl").string() + " --out " +
                        (kWork / "transcript.jsonl").string()) == 0);
    const std::string transcript = slurp(kWork / "transcript.jsonl");
    CHECK(transcript.find(state.registry.roles[0].profile.name) != std::string::npos);

    // eval gating suite
    REQUIRE(run_cli("eval --ckpt " + (kWork / "ck1").string() + " --suite gating --out " +
                        (kWork / "report.json").string(),
                    (kWork / "eval_stdout.json").string()) == 0);
    const auto report = nlohmann::json::parse(slurp(kWork / "report.json"));
    CHECK(report.at("gating_accuracy_canonical") == 1.0);

    // gradcheck
    REQUIRE(run_cli("gradcheck --config " + config_path,
                    (kWork / "gradcheck.json").string()) == 0);
    const auto grad = nlohmann::json::parse(slurp(kWork / "gradcheck.json"));
    CHECK(grad.at("pass") == true);

    // machine-parseable errors with the documented exit codes
    CHECK(run_cli("chat --ckpt " + (kWork / "nonexistent").string()) == 4);
    const auto error_line = nlohmann::json::parse(slurp(kWork / "stderr.txt"));
    CHECK(error_line.at("exit_code") == 4);

    {
        std::ofstream out(kWork / "bad_config.json");
        out << R"({"unknown_knob": 3})";
    }
    CHECK(run_cli("pretrain --config " + (kWork / "bad_config.json").string() + " --out " +
                  (kWork / "ck_bad2").string()) == 2);

    fs::remove_all(kWork);
}
