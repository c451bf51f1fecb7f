// SPDX-License-Identifier: Apache-2.0
//
// Small fixtures shared across the unit suites: a tiny two-role world
// with disjoint token sets and a quickly pre-trained backbone.
#pragma once

#include <string>
#include <vector>

#include "rolecast/backbone.hpp"
#include "rolecast/rng.hpp"

namespace rolecast::testutil {

struct MiniWorld {
    Vocabulary vocab;
    ModelState model;
    // Per role: train and heldout sequences over disjoint token sets.
    std::vector<std::vector<TokenSequence>> train;
    std::vector<std::vector<TokenSequence>> heldout;
};

// roles of 4 exclusive words each plus 4 shared words; the backbone is
// pre-trained on the mixed corpus.
inline MiniWorld make_mini_world(std::size_t roles = 2, std::uint64_t seed = 21,
                                 std::size_t train_sequences = 40,
                                 std::size_t heldout_sequences = 8) {
    MiniWorld world;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < 4 + 4 * roles; ++i)
        words.push_back("w" + std::to_string(i));
    world.vocab = Vocabulary::build(words);

    auto sample_role = [&](std::size_t role, std::size_t count,
                           std::uint64_t stream) {
        std::vector<TokenSequence> out;
        for (std::size_t i = 0; i < count; ++i) {
            RandomStream rng(derive_seed(seed, "mini-seq", stream * 10000 + role * 100 + i));
            TokenSequence seq;
            for (std::size_t t = 0; t < 8; ++t) {
                // 70% own exclusive tokens, 30% shared pool
                const bool exclusive = rng.bernoulli(0.7);
                const std::size_t base = exclusive ? 3 + 4 + 4 * role : 3;
                seq.ids.push_back(static_cast<int>(base + rng.uniform_index(4)));
            }
            out.push_back(std::move(seq));
        }
        return out;
    };

    std::vector<TokenSequence> mixed;
    for (std::size_t role = 0; role < roles; ++role) {
        world.train.push_back(sample_role(role, train_sequences, 1));
        world.heldout.push_back(sample_role(role, heldout_sequences, 2));
        mixed.insert(mixed.end(), world.train.back().begin(), world.train.back().end());
    }

    PretrainOptions options;
    options.context_window = 6;
    options.d_model = 12;
    options.learning_rate = 0.05;
    options.epochs = 4;
    options.seed = derive_seed(seed, "mini-backbone");
    world.model = pretrain_base(mixed, world.vocab, options);
    return world;
}

}  // namespace rolecast::testutil
