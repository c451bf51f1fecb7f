// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. Defaults follow the standard setup: 8 roles at
// partial rank 4 (total rank 32), learning rate 1e-4, 10 epochs, and a
// rank-8 shared baseline. The total rank is always derived as
// capacity * partial_rank and never set directly.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rolecast/lora.hpp"

namespace rolecast {

struct Config {
    std::uint64_t master_seed = 42;
    // Optional per-phase overrides keyed by stream tag.
    std::map<std::string, std::uint64_t> seed_overrides;

    std::size_t num_roles = 8;      // pre-tuned role blocks
    std::size_t partial_rank = 4;
    double alpha = 0.0;             // 0 means "default to partial_rank"
    std::size_t baseline_rank = 8;  // shared single-block comparator

    std::size_t d_model = 32;
    std::size_t context_window = 8;
    std::size_t d_embed = 16;

    double learning_rate = 1e-4;  // adapter blocks
    std::size_t epochs = 10;

    double backbone_learning_rate = 0.05;
    std::size_t backbone_epochs = 8;
    double embedding_init_stddev = 0.3;
    double hidden_init_stddev = 0.3;
    double lora_init_stddev = 0.02;

    double gate_learning_rate = 0.5;
    std::size_t gate_epochs = 400;
    int gate_max_retries = 5;
    std::size_t gate_perturbations = 5;
    double gate_dropout = 0.2;

    double switch_threshold = 0.35;

    std::size_t sequences_per_role = 300;
    std::size_t sequence_length = 12;
    double phrase_insertion_rate = 0.2;

    std::size_t max_tokens = 16;
    std::size_t transfer_scripts = 10;
    std::size_t transfer_rounds = 5;

    double effective_alpha() const {
        return alpha > 0.0 ? alpha : static_cast<double>(partial_rank);
    }
    std::size_t total_rank() const { return num_roles * partial_rank; }
    BlockLayout layout() const {
        return BlockLayout::create(num_roles, partial_rank, effective_alpha());
    }
    BlockLayout baseline_layout() const {
        return BlockLayout::create(1, baseline_rank, static_cast<double>(baseline_rank));
    }
    std::uint64_t seed_for(const std::string& tag) const;
    void validate() const;  // throws InvalidArgument
};

Config config_from_json_text(const std::string& text);
Config load_config(const std::string& path);
std::string config_to_json_text(const Config& config);
std::uint64_t config_digest(const Config& config);

}  // namespace rolecast
