// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>

#include <doctest.h>

#include "rolecast/agent.hpp"
#include "rolecast/errors.hpp"
#include "test_world.hpp"

using namespace rolecast;
using testutil::shared_pipeline;

TEST_CASE("parse_meta_prompt") {
    const auto meta = parse_meta_prompt("I want you to act like Cleopatra");
    REQUIRE(meta);
    CHECK(meta->name == "Cleopatra");
    CHECK(meta->residual.empty());

    const auto longer = parse_meta_prompt(canonical_prompt_for("Zorvath"));
    REQUIRE(longer);
    CHECK(longer->name == "Zorvath");
    CHECK_FALSE(longer->residual.empty());

    const auto cased = parse_meta_prompt("i WANT you TO act LIKE morgana, as of now");
    REQUIRE(cased);
    CHECK(cased->name == "morgana");

    CHECK_FALSE(parse_meta_prompt("Play the evil parsalmouth wizard in Harry Potter."));
    CHECK_FALSE(parse_meta_prompt(""));
    CHECK_FALSE(parse_meta_prompt("I want you to act like "));
}

TEST_CASE("first canonical turn activates the named block") {
    const auto& fixture = shared_pipeline();
    Conversation conversation;
    const auto& role1 = fixture.state.registry.roles[1];
    const DialogueTurn turn = respond(fixture.state, role1.profile.canonical_prompt,
                                      conversation, fixture.config.max_tokens);
    REQUIRE(turn.routing);
    CHECK(turn.routing->role_index == 1);
    CHECK(turn.routing->switched);
    REQUIRE(turn.activation);
    CHECK(turn.activation->kind == Activation::Kind::block);
    CHECK(turn.activation->block == 1);
    CHECK(conversation.current_role == 1);
    CHECK(conversation.turns.size() == 2);
    CHECK(conversation.turns[0].implied_role == role1.profile.name);
}

TEST_CASE("cue-free text keeps the current role") {
    const auto& fixture = shared_pipeline();
    Conversation conversation;
    respond(fixture.state, fixture.state.registry.roles[0].profile.canonical_prompt,
            conversation, 8);
    const std::string filler = fixture.world.filler_lexicon[0] + " " +
                               fixture.world.filler_lexicon[1] + " " +
                               fixture.world.filler_lexicon[2];
    const DialogueTurn turn = respond(fixture.state, filler, conversation, 8);
    CHECK_FALSE(turn.routing->switched);
    CHECK(turn.routing->role_index == 0);
    CHECK(conversation.current_role == 0);
}

TEST_CASE("alternating canonical prompts alternate activations") {
    const auto& fixture = shared_pipeline();
    const auto& roles = fixture.state.registry.roles;
    Conversation conversation;
    const std::vector<int> expected = {0, 1, 0, 1, 0};
    for (int idx : expected) {
        const DialogueTurn turn =
            respond(fixture.state, roles[static_cast<std::size_t>(idx)].profile.canonical_prompt,
                    conversation, 8);
        CHECK(turn.routing->role_index == idx);
        CHECK(turn.activation->block == idx);
    }
}

TEST_CASE("turns alternate user then agent") {
    const auto& fixture = shared_pipeline();
    Conversation conversation;
    respond(fixture.state, fixture.state.registry.roles[0].profile.canonical_prompt,
            conversation, 4);
    respond(fixture.state, "more please", conversation, 4);
    REQUIRE(conversation.turns.size() == 4);
    CHECK(conversation.turns[0].speaker == DialogueTurn::Speaker::user);
    CHECK(conversation.turns[1].speaker == DialogueTurn::Speaker::agent);
    CHECK(conversation.turns[2].speaker == DialogueTurn::Speaker::user);
    CHECK(conversation.turns[3].speaker == DialogueTurn::Speaker::agent);
}

TEST_CASE("respond validates input") {
    const auto& fixture = shared_pipeline();
    Conversation conversation;
    CHECK_THROWS_AS(respond(fixture.state, "hello", conversation, 0), InvalidArgument);

    AgentState empty = fixture.state;
    empty.registry = RoleRegistry::create(16, 1);
    Conversation fresh;
    CHECK_THROWS_AS(respond(empty, "hello", fresh, 4), NoRolesError);
}

TEST_CASE("run_script produces one row per user turn and replays exactly") {
    const auto& fixture = shared_pipeline();
    std::vector<ScriptTurn> script(1);
    script[0].text = fixture.state.registry.roles[2].profile.canonical_prompt;
    const auto rows = run_script(fixture.state, script, 8);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].routing.role_index == 2);
    CHECK_FALSE(rows[0].expected_role);

    const auto scripts = generate_transfer_scripts(fixture.state.registry,
                                                   fixture.world.filler_lexicon, 3, 5, 9);
    REQUIRE(scripts.size() == 3);
    for (const auto& s : scripts) {
        REQUIRE(s.size() == 5);
        const auto a = run_script(fixture.state, s, fixture.config.max_tokens);
        const auto b = run_script(fixture.state, s, fixture.config.max_tokens);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].agent_text == b[i].agent_text);
            CHECK(a[i].routing.role_index == b[i].routing.role_index);
            CHECK(a[i].routing.best_cosine == b[i].routing.best_cosine);
        }
    }

    CHECK_THROWS_AS(run_script(fixture.state, std::vector<ScriptTurn>{}, 8),
                    InvalidArgument);
}

TEST_CASE("role persistence between same-role turns") {
    const auto& fixture = shared_pipeline();
    const auto scripts = generate_transfer_scripts(fixture.state.registry,
                                                   fixture.world.filler_lexicon, 5, 5, 11);
    for (const auto& script : scripts) {
        const auto rows = run_script(fixture.state, script, fixture.config.max_tokens);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (*rows[i].expected_role == *rows[i - 1].expected_role)
                CHECK(rows[i].routing.role_index == rows[i - 1].routing.role_index);
        }
    }
}

TEST_CASE("script files round trip") {
    const std::string path = "rolecast_test_script.jsonl";
    {
        std::ofstream out(path);
        out << R"({"text": "I want you to act like Xylia", "expected_role": "Xylia"})" << "\n";
        out << R"({"text": "go on", "expected_role": null})" << "\n";
    }
    const auto script = load_script(path);
    REQUIRE(script.size() == 2);
    CHECK(script[0].expected_role == "Xylia");
    CHECK_FALSE(script[1].expected_role);
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << "{broken\n";
    }
    CHECK_THROWS_AS(load_script(path), InvalidArgument);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_script("missing_script.jsonl"), IoError);
}

TEST_CASE("transcripts serialize with routing records") {
    const auto& fixture = shared_pipeline();
    std::vector<ScriptTurn> script(2);
    script[0].text = fixture.state.registry.roles[0].profile.canonical_prompt;
    script[0].expected_role = fixture.state.registry.roles[0].profile.name;
    script[1].text = "carry on";
    script[1].expected_role = fixture.state.registry.roles[0].profile.name;
    const auto rows = run_script(fixture.state, script, 8);

    const std::string path = "rolecast_test_transcript.jsonl";
    save_transcript(path, rows);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(line.find("routed_role") != std::string::npos);
    }
    CHECK(lines == 2);
    std::remove(path.c_str());
}
