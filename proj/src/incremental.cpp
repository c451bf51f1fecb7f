// SPDX-License-Identifier: Apache-2.0

#include "rolecast/incremental.hpp"

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

std::pair<int, ProbVector> fuse_role(RoleRegistry& registry, const GateState& gate,
                                     const AdapterSet& adapters,
                                     const RoleProfile& profile) {
    if (adapters.trained_blocks.empty())
        throw UnsupportedError("fuse_role: no trained blocks to combine");
    const std::vector<double> e =
        embed_profile(profile.profile_text, registry.d_embed, registry.embed_seed);
    ProbVector weights = gate.block_weights(e);
    const int index = register_role(registry, gate, profile, Activation::fuse(weights));
    return {index, std::move(weights)};
}

namespace {

// Exact stage-1 + argmax routing for every block role's canonical prompt.
bool old_routing_exact(const RoleRegistry& registry, const GateState& gate) {
    for (std::size_t i = 0; i < registry.roles.size(); ++i) {
        const RoleRecord& record = registry.roles[i];
        if (record.activation.kind != Activation::Kind::block) continue;
        const RouteResult r = route(registry, gate, record.profile.canonical_prompt);
        if (r.role_index != static_cast<int>(i)) return false;
        if (!r.gate_agrees) return false;
    }
    return true;
}

}  // namespace

int expand_role(RoleRegistry& registry, GateState& gate, AdapterSet& adapters,
                const ModelState& model, const RoleProfile& profile,
                const std::vector<TokenSequence>& corpus, const ExpandOptions& options) {
    if (corpus.empty()) throw InvalidArgument("expand_role: empty corpus");
    if (adapters.mode != AdapterMode::partitioned)
        throw InvalidArgument("expand_role: adapter set is not in partitioned mode");

    const std::vector<std::uint64_t> before = all_block_digests(adapters);

    adapters.expand(options.lora_init_stddev, derive_seed(options.seed, "expand"));
    const int new_block = static_cast<int>(adapters.layout.capacity) - 1;
    gate.append_block_column();

    const int index = register_role(registry, gate, profile,
                                    Activation::for_block(new_block));
    train_block(adapters, model, new_block, corpus, options.lora);

    GateTrainOptions gate_options = options.gate;
    gate_options.warm_start = true;
    train_gate(gate, make_gate_examples(registry, /*perturbations=*/5, /*dropout=*/0.2,
                                        derive_seed(options.seed, "expand-gate-data")),
               gate_options);

    const std::vector<std::uint64_t> after = all_block_digests(adapters);
    for (std::size_t k = 0; k < before.size(); ++k)
        if (before[k] != after[k])
            throw TrainingError("expand_role: frozen block " + std::to_string(k) +
                                " was modified");
    if (!old_routing_exact(registry, gate))
        throw TrainingError("expand_role: routing for existing roles degraded");
    return index;
}

IncrementalReport add_role(RoleRegistry& registry, GateState& gate,
                           AdapterSet& adapters, const ModelState& model,
                           const RoleProfile& profile,
                           const std::vector<TokenSequence>& corpus,
                           const AddRoleOptions& options) {
    IncrementalReport report;
    report.strategy = options.strategy;
    report.gate_cols_before = gate.block_count();

    if (options.strategy == IncrementalStrategy::fusion) {
        const std::uint64_t digest_before = adapter_digest(adapters);
        auto [index, weights] = fuse_role(registry, gate, adapters, profile);
        report.new_role_index = index;
        report.fusion_weights = weights.values();
        report.blocks_frozen_verified = (adapter_digest(adapters) == digest_before);
    } else {
        const std::vector<std::uint64_t> before = all_block_digests(adapters);
        report.new_role_index =
            expand_role(registry, gate, adapters, model, profile, corpus, options.expand);
        const std::vector<std::uint64_t> after = all_block_digests(adapters);
        report.blocks_frozen_verified = true;
        for (std::size_t k = 0; k < before.size(); ++k)
            if (before[k] != after[k]) report.blocks_frozen_verified = false;
    }
    report.gate_cols_after = gate.block_count();
    return report;
}

}  // namespace rolecast
