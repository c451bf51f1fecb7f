// SPDX-License-Identifier: Apache-2.0
//
// Rank-partitioned low-rank adapters. A LoraModule pairs the usual B
// (out x r) and A (r x in) factors for one adapted weight matrix; the
// shared BlockLayout slices both into per-role blocks of width
// partial_rank, so role k owns columns [(k-1)p, kp) of B and the same
// rows of A and nothing else.
#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rolecast/numerics.hpp"

namespace rolecast {

struct BlockLayout {
    std::size_t capacity = 1;      // number of role blocks
    std::size_t partial_rank = 1;  // rank owned by each role
    double alpha = 1.0;            // adapter scaling constant

    std::size_t total_rank() const { return capacity * partial_rank; }
    // A single active block has effective rank partial_rank, so updates
    // are scaled by alpha / partial_rank rather than alpha / total_rank.
    double block_scale() const { return alpha / static_cast<double>(partial_rank); }

    static BlockLayout create(std::size_t capacity, std::size_t partial_rank,
                              double alpha);
    // For externally supplied ranks (checkpoints): rejects any total rank
    // that is not capacity * partial_rank.
    static BlockLayout with_total_rank(std::size_t capacity, std::size_t partial_rank,
                                       double alpha, std::size_t total_rank);
};

// Half-open column/row range owned by role number k (1-based, as in the
// slice rule B[:, (k-1)p : kp]).
std::pair<std::size_t, std::size_t> block_range(std::size_t role_number,
                                                std::size_t partial_rank);
// Bound-checked against a layout.
std::pair<std::size_t, std::size_t> block_range(const BlockLayout& layout,
                                                std::size_t role_number);

enum class AdapterMode { partitioned, shared_baseline };

// Factors for one adapted matrix. B starts at zero so a fresh adapter is
// an exact identity; A is seeded zero-mean Gaussian.
struct LoraModule {
    Matrix b;  // out x r
    Matrix a;  // r x in

    static LoraModule init(std::size_t out_dim, std::size_t in_dim,
                           const BlockLayout& layout, double init_stddev,
                           std::uint64_t seed);
};

struct Activation {
    enum class Kind { none, block, fusion };
    Kind kind = Kind::none;
    int block = -1;                // 0-based block index
    std::vector<double> weights;   // fusion weights over existing blocks

    static Activation none() { return {}; }
    static Activation for_block(int block);
    static Activation fuse(const ProbVector& weights);
    bool is_none() const { return kind == Kind::none; }
};

void validate_activation(const Activation& act, const BlockLayout& layout);

// y += ΔW x for one module under an activation:
//   block k   -> scale * B_k (A_k x)
//   fusion w  -> sum_k w_k * scale * B_k (A_k x)
void add_lora_delta(std::vector<double>& y, const LoraModule& module,
                    const BlockLayout& layout, const Activation& act,
                    std::span<const double> x);

// w0 x + ΔW x
std::vector<double> lora_forward(const Matrix& w0, const LoraModule& module,
                                 const BlockLayout& layout, const Activation& act,
                                 std::span<const double> x);

// The two adapted backbone matrices carry independent modules under one
// shared layout; blocks are trained jointly across both.
struct AdapterSet {
    BlockLayout layout;
    AdapterMode mode = AdapterMode::partitioned;
    LoraModule hidden;  // adapts the d x d hidden matrix
    LoraModule output;  // adapts the V x d output matrix
    std::set<int> trained_blocks;  // 0-based

    static AdapterSet init(std::size_t d_model, std::size_t vocab_size,
                           const BlockLayout& layout, AdapterMode mode,
                           double init_stddev, std::uint64_t seed);

    // Appends one block: partial_rank zero columns to each B, partial_rank
    // seeded Gaussian rows to each A. Existing entries are untouched.
    void expand(double init_stddev, std::uint64_t seed);

    bool is_trained(int block) const { return trained_blocks.count(block) > 0; }
};

// Digest of the bytes owned by one block (B columns + A rows, both modules).
std::uint64_t block_digest(const AdapterSet& set, int block);
std::vector<std::uint64_t> all_block_digests(const AdapterSet& set);
// Digest over every B/A byte in the set.
std::uint64_t adapter_digest(const AdapterSet& set);

}  // namespace rolecast
