// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <doctest.h>

#include "rolecast/errors.hpp"
#include "rolecast/evalkit.hpp"
#include "rolecast/incremental.hpp"
#include "rolecast/pipeline.hpp"
#include "test_world.hpp"

using namespace rolecast;
using testutil::shared_pipeline;

namespace {

AddRoleOptions expansion_options(const Config& config) {
    AddRoleOptions options;
    options.strategy = IncrementalStrategy::expansion;
    options.expand.lora.learning_rate = config.learning_rate;
    options.expand.lora.epochs = config.epochs;
    options.expand.gate.learning_rate = config.gate_learning_rate;
    options.expand.gate.epochs = config.gate_epochs;
    options.expand.gate.seed = config.seed_for("expand-gate");
    options.expand.lora_init_stddev = config.lora_init_stddev;
    options.expand.seed = config.seed_for("expand");
    return options;
}

}  // namespace

TEST_CASE("fusion is read-only on adapter weights") {
    const auto& fixture = shared_pipeline();
    AgentState state = fixture.state;

    const std::uint64_t digest_before = adapter_digest(state.adapters);
    const RoleProfile profile = profile_for(incremental_character(fixture.world));

    auto [index, weights] = fuse_role(state.registry, state.gate, state.adapters, profile);
    CHECK(index == static_cast<int>(fixture.config.num_roles));
    CHECK(adapter_digest(state.adapters) == digest_before);

    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) sum += weights[i];
    CHECK(weights.size() == fixture.config.num_roles);
    CHECK(std::abs(sum - 1.0) < 1e-12);

    // the fused role is routable like any other
    const RouteResult r = route(state.registry, state.gate, profile.profile_text);
    CHECK(r.role_index == index);
    CHECK(r.activation.kind == Activation::Kind::fusion);
}

TEST_CASE("fusing a duplicate profile mirrors the duplicated role") {
    const auto& fixture = shared_pipeline();
    AgentState state = fixture.state;

    const RoleRecord& original = state.registry.roles[1];
    RoleProfile copy;
    copy.name = "Mirror";
    copy.profile_text = original.profile.profile_text;  // identical embedding

    auto [index, weights] = fuse_role(state.registry, state.gate, state.adapters, copy);
    const auto row = state.registry.embeddings.row(1);
    const ProbVector expected = state.gate.block_weights(row);
    for (std::size_t k = 0; k < weights.size(); ++k)
        CHECK(std::abs(weights[k] - expected[k]) < 1e-12);

    // inference through the fused activation tracks role 1's block closely
    const std::vector<int> ctx = {Vocabulary::kBos, 5, 6};
    const auto fused_logits =
        forward_logits(state.model, ctx, &state.adapters, Activation::fuse(weights));
    const auto block_logits =
        forward_logits(state.model, ctx, &state.adapters, original.activation);
    // gate weights concentrate on block 1, so outputs are near-identical
    const double gap = weights[1] >= 0.999 ? 1e-9 : 0.3;
    for (std::size_t i = 0; i < fused_logits.size(); ++i)
        CHECK(std::abs(fused_logits[i] - block_logits[i]) < gap);
    CHECK(index == static_cast<int>(state.registry.roles.size()) - 1);
}

TEST_CASE("fusion requires at least one trained block") {
    const auto& fixture = shared_pipeline();
    RoleRegistry registry = RoleRegistry::create(16, 3);
    GateState gate;
    gate.weights = Matrix(16, 2, 0.0);
    AdapterSet fresh = AdapterSet::init(8, 16, BlockLayout::create(2, 2, 2.0),
                                        AdapterMode::partitioned, 0.02, 4);
    const RoleProfile profile = profile_for(incremental_character(fixture.world));
    CHECK_THROWS_AS(fuse_role(registry, gate, fresh, profile), UnsupportedError);
}

TEST_CASE("expansion adds a trained, isolated block") {
    const auto& fixture = shared_pipeline();
    AgentState state = fixture.state;
    const SyntheticWorld& world = fixture.world;

    const std::size_t old_capacity = state.adapters.layout.capacity;
    const auto before_digests = all_block_digests(state.adapters);
    const std::uint64_t model_before = model_digest(state.model);

    // canonical routing snapshot for old roles
    std::vector<int> routed_before;
    for (const auto& record : state.registry.roles)
        routed_before.push_back(
            route(state.registry, state.gate, record.profile.canonical_prompt).role_index);

    const RoleProfile profile = profile_for(incremental_character(world));
    AddRoleOptions options = expansion_options(fixture.config);
    const IncrementalReport report =
        add_role(state.registry, state.gate, state.adapters, state.model, profile,
                 incremental_dataset(world).train.sequences, options);

    CHECK(report.blocks_frozen_verified);
    CHECK(report.new_role_index == static_cast<int>(old_capacity));
    CHECK(report.gate_cols_before == old_capacity);
    CHECK(report.gate_cols_after == old_capacity + 1);

    CHECK(state.adapters.layout.capacity == old_capacity + 1);
    CHECK(state.adapters.layout.total_rank() ==
          (old_capacity + 1) * state.adapters.layout.partial_rank);
    CHECK(model_digest(state.model) == model_before);

    const auto after_digests = all_block_digests(state.adapters);
    for (std::size_t k = 0; k < before_digests.size(); ++k)
        CHECK(after_digests[k] == before_digests[k]);

    // old canonical routing unchanged, new role routable
    for (std::size_t i = 0; i < routed_before.size(); ++i)
        CHECK(route(state.registry, state.gate,
                    state.registry.roles[i].profile.canonical_prompt)
                  .role_index == routed_before[i]);
    const RouteResult new_route =
        route(state.registry, state.gate, profile.canonical_prompt);
    CHECK(new_route.role_index == report.new_role_index);
    CHECK(new_route.activation.block == static_cast<int>(old_capacity));

    // the trained new block beats the base model on its heldout split
    const double adapted = perplexity(state.model, &state.adapters,
                                      Activation::for_block(static_cast<int>(old_capacity)),
                                      incremental_dataset(world).heldout.sequences);
    const double base = perplexity(state.model, nullptr, Activation::none(),
                                   incremental_dataset(world).heldout.sequences);
    CHECK(adapted < base);

    // pre-existing role outputs bit-identical through any old block
    AgentState fresh = fixture.state;
    const std::vector<int> ctx = {Vocabulary::kBos, 7, 9};
    for (std::size_t k = 0; k < old_capacity; ++k) {
        const auto before_out = forward_logits(fresh.model, ctx, &fresh.adapters,
                                               Activation::for_block(static_cast<int>(k)));
        const auto after_out = forward_logits(state.model, ctx, &state.adapters,
                                              Activation::for_block(static_cast<int>(k)));
        CHECK(before_out == after_out);
    }
}

TEST_CASE("expansion rejects an empty corpus") {
    const auto& fixture = shared_pipeline();
    AgentState state = fixture.state;
    const RoleProfile profile = profile_for(incremental_character(fixture.world));
    AddRoleOptions options = expansion_options(fixture.config);
    CHECK_THROWS_AS(expand_role(state.registry, state.gate, state.adapters, state.model,
                                profile, {}, options.expand),
                    InvalidArgument);
}
