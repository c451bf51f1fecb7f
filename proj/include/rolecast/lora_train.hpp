// SPDX-License-Identifier: Apache-2.0
//
// Block-restricted adapter training. Training role block k runs SGD on
// next-token cross-entropy through the block-k adapted forward pass and
// writes only the B columns / A rows owned by that block.
#pragma once

#include <vector>

#include "rolecast/backbone.hpp"
#include "rolecast/lora.hpp"

namespace rolecast {

struct TrainOptions {
    double learning_rate = 1e-4;
    std::size_t epochs = 10;
};

// block is 0-based; role number k = block + 1 owns columns [(k-1)p, kp).
void train_block(AdapterSet& adapters, const ModelState& model, int block,
                 const std::vector<TokenSequence>& corpus, const TrainOptions& options);

// The single-block comparator: fine-tunes the whole (rank = partial_rank)
// adapter on each corpus in arrival order. Requires shared_baseline mode
// with capacity 1.
void train_shared_baseline(AdapterSet& adapters, const ModelState& model,
                           const std::vector<std::vector<TokenSequence>>& corpora,
                           const TrainOptions& options);

}  // namespace rolecast
