// SPDX-License-Identifier: Apache-2.0

#include "rolecast/lora.hpp"

#include <cmath>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

BlockLayout BlockLayout::create(std::size_t capacity, std::size_t partial_rank,
                                double alpha) {
    if (capacity < 1) throw InvalidArgument("block layout: capacity must be >= 1");
    if (partial_rank < 1) throw InvalidArgument("block layout: partial rank must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("block layout: alpha must be positive and finite");
    BlockLayout layout;
    layout.capacity = capacity;
    layout.partial_rank = partial_rank;
    layout.alpha = alpha;
    return layout;
}

BlockLayout BlockLayout::with_total_rank(std::size_t capacity, std::size_t partial_rank,
                                         double alpha, std::size_t total_rank) {
    BlockLayout layout = create(capacity, partial_rank, alpha);
    if (layout.total_rank() != total_rank)
        throw InvalidArgument("block layout: total rank " + std::to_string(total_rank) +
                              " != capacity * partial rank (" +
                              std::to_string(layout.total_rank()) + ")");
    return layout;
}

std::pair<std::size_t, std::size_t> block_range(std::size_t role_number,
                                                std::size_t partial_rank) {
    if (role_number < 1) throw InvalidArgument("block_range: role number starts at 1");
    if (partial_rank < 1) throw InvalidArgument("block_range: partial rank must be >= 1");
    return {(role_number - 1) * partial_rank, role_number * partial_rank};
}

std::pair<std::size_t, std::size_t> block_range(const BlockLayout& layout,
                                                std::size_t role_number) {
    if (role_number > layout.capacity)
        throw InvalidArgument("block_range: role number " + std::to_string(role_number) +
                              " exceeds capacity " + std::to_string(layout.capacity));
    return block_range(role_number, layout.partial_rank);
}

LoraModule LoraModule::init(std::size_t out_dim, std::size_t in_dim,
                            const BlockLayout& layout, double init_stddev,
                            std::uint64_t seed) {
    LoraModule m;
    m.b = Matrix(out_dim, layout.total_rank(), 0.0);
    RandomStream rng(seed);
    m.a = gaussian_matrix(layout.total_rank(), in_dim, init_stddev, rng);
    return m;
}

Activation Activation::for_block(int block) {
    if (block < 0) throw InvalidArgument("activation: block index must be >= 0");
    Activation act;
    act.kind = Kind::block;
    act.block = block;
    return act;
}

Activation Activation::fuse(const ProbVector& weights) {
    Activation act;
    act.kind = Kind::fusion;
    act.weights = weights.values();
    return act;
}

void validate_activation(const Activation& act, const BlockLayout& layout) {
    switch (act.kind) {
        case Activation::Kind::none:
            return;
        case Activation::Kind::block:
            if (act.block < 0 || static_cast<std::size_t>(act.block) >= layout.capacity)
                throw InvalidArgument("activation: block index out of range");
            return;
        case Activation::Kind::fusion:
            if (act.weights.empty() || act.weights.size() > layout.capacity)
                throw InvalidArgument("activation: fusion weights do not fit layout");
            return;
    }
}

namespace {

// t = A rows [r0, r1) times x
std::vector<double> slice_rows_matvec(const Matrix& a, std::size_t r0, std::size_t r1,
                                      std::span<const double> x) {
    std::vector<double> t(r1 - r0, 0.0);
    for (std::size_t r = r0; r < r1; ++r) {
        const double* row = a.data.data() + r * a.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += row[j] * x[j];
        t[r - r0] = acc;
    }
    return t;
}

// y += scale * B columns [c0, c1) times t
void add_slice_cols_matvec(std::vector<double>& y, const Matrix& b, std::size_t c0,
                           std::size_t c1, std::span<const double> t, double scale) {
    for (std::size_t i = 0; i < b.rows; ++i) {
        const double* row = b.data.data() + i * b.cols;
        double acc = 0.0;
        for (std::size_t c = c0; c < c1; ++c) acc += row[c] * t[c - c0];
        y[i] += scale * acc;
    }
}

void add_block_delta(std::vector<double>& y, const LoraModule& module,
                     const BlockLayout& layout, std::size_t block0,
                     std::span<const double> x, double weight) {
    const auto [r0, r1] = block_range(layout, block0 + 1);
    const std::vector<double> t = slice_rows_matvec(module.a, r0, r1, x);
    add_slice_cols_matvec(y, module.b, r0, r1, t, weight * layout.block_scale());
}

}  // namespace

void add_lora_delta(std::vector<double>& y, const LoraModule& module,
                    const BlockLayout& layout, const Activation& act,
                    std::span<const double> x) {
    validate_activation(act, layout);
    if (x.size() != module.a.cols) throw InvalidArgument("lora delta: input dimension mismatch");
    if (y.size() != module.b.rows) throw InvalidArgument("lora delta: output dimension mismatch");
    switch (act.kind) {
        case Activation::Kind::none:
            return;
        case Activation::Kind::block:
            add_block_delta(y, module, layout, static_cast<std::size_t>(act.block), x, 1.0);
            return;
        case Activation::Kind::fusion:
            for (std::size_t k = 0; k < act.weights.size(); ++k)
                if (act.weights[k] != 0.0)
                    add_block_delta(y, module, layout, k, x, act.weights[k]);
            return;
    }
}

std::vector<double> lora_forward(const Matrix& w0, const LoraModule& module,
                                 const BlockLayout& layout, const Activation& act,
                                 std::span<const double> x) {
    std::vector<double> y = matvec(w0, x);
    add_lora_delta(y, module, layout, act, x);
    return y;
}

AdapterSet AdapterSet::init(std::size_t d_model, std::size_t vocab_size,
                            const BlockLayout& layout, AdapterMode mode,
                            double init_stddev, std::uint64_t seed) {
    AdapterSet set;
    set.layout = layout;
    set.mode = mode;
    set.hidden = LoraModule::init(d_model, d_model, layout, init_stddev,
                                  derive_seed(seed, "lora-a-hidden"));
    set.output = LoraModule::init(vocab_size, d_model, layout, init_stddev,
                                  derive_seed(seed, "lora-a-output"));
    return set;
}

namespace {

void expand_module(LoraModule& m, std::size_t partial_rank, double init_stddev,
                   std::uint64_t seed) {
    const std::size_t old_rank = m.b.cols;
    Matrix b(m.b.rows, old_rank + partial_rank, 0.0);
    for (std::size_t i = 0; i < m.b.rows; ++i)
        for (std::size_t j = 0; j < old_rank; ++j) b.at(i, j) = m.b.at(i, j);
    m.b = std::move(b);

    RandomStream rng(seed);
    Matrix a(old_rank + partial_rank, m.a.cols, 0.0);
    for (std::size_t i = 0; i < old_rank; ++i)
        for (std::size_t j = 0; j < m.a.cols; ++j) a.at(i, j) = m.a.at(i, j);
    for (std::size_t i = old_rank; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) a.at(i, j) = rng.normal(0.0, init_stddev);
    m.a = std::move(a);
}

void hash_block_bytes(std::uint64_t& h, const LoraModule& m, std::size_t r0,
                      std::size_t r1) {
    std::vector<double> buf;
    buf.reserve((r1 - r0) * (m.b.rows + m.a.cols));
    for (std::size_t i = 0; i < m.b.rows; ++i)
        for (std::size_t c = r0; c < r1; ++c) buf.push_back(m.b.at(i, c));
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t j = 0; j < m.a.cols; ++j) buf.push_back(m.a.at(r, j));
    h = fnv1a64_bytes(buf.data(), buf.size() * sizeof(double)) ^ mix64(h);
}

}  // namespace

void AdapterSet::expand(double init_stddev, std::uint64_t seed) {
    expand_module(hidden, layout.partial_rank, init_stddev,
                  derive_seed(seed, "expand-hidden", layout.capacity));
    expand_module(output, layout.partial_rank, init_stddev,
                  derive_seed(seed, "expand-output", layout.capacity));
    layout.capacity += 1;
}

std::uint64_t block_digest(const AdapterSet& set, int block) {
    if (block < 0 || static_cast<std::size_t>(block) >= set.layout.capacity)
        throw InvalidArgument("block_digest: block index out of range");
    const auto [r0, r1] = block_range(set.layout, static_cast<std::size_t>(block) + 1);
    std::uint64_t h = 0x243f6a8885a308d3ull;
    hash_block_bytes(h, set.hidden, r0, r1);
    hash_block_bytes(h, set.output, r0, r1);
    return h;
}

std::vector<std::uint64_t> all_block_digests(const AdapterSet& set) {
    std::vector<std::uint64_t> out;
    out.reserve(set.layout.capacity);
    for (std::size_t k = 0; k < set.layout.capacity; ++k)
        out.push_back(block_digest(set, static_cast<int>(k)));
    return out;
}

std::uint64_t adapter_digest(const AdapterSet& set) {
    std::uint64_t h = 0x13198a2e03707344ull;
    h ^= mix64(matrix_digest(set.hidden.b));
    h ^= mix64(matrix_digest(set.hidden.a) + 1);
    h ^= mix64(matrix_digest(set.output.b) + 2);
    h ^= mix64(matrix_digest(set.output.a) + 3);
    return h;
}

}  // namespace rolecast
