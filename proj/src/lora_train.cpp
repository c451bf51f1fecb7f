// SPDX-License-Identifier: Apache-2.0

#include "rolecast/lora_train.hpp"

#include "rolecast/errors.hpp"

namespace rolecast {

namespace {

// param slice -= lr * grad, grad laid out as the slice.
void apply_block_cols(Matrix& b, std::size_t c0, std::size_t c1, const Matrix& grad,
                      double lr) {
    for (std::size_t i = 0; i < b.rows; ++i)
        for (std::size_t c = c0; c < c1; ++c) b.at(i, c) -= lr * grad.at(i, c - c0);
}

void apply_block_rows(Matrix& a, std::size_t r0, std::size_t r1, const Matrix& grad,
                      double lr) {
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t j = 0; j < a.cols; ++j) a.at(r, j) -= lr * grad.at(r - r0, j);
}

void train_block_impl(AdapterSet& adapters, const ModelState& model, int block,
                      const std::vector<TokenSequence>& corpus,
                      const TrainOptions& options) {
    if (block < 0 || static_cast<std::size_t>(block) >= adapters.layout.capacity)
        throw InvalidArgument("train_block: block index out of range");
    if (corpus.empty()) throw InvalidArgument("train_block: empty corpus");
    if (!model.frozen) throw InvalidArgument("train_block: backbone must be frozen");
    if (!(options.learning_rate > 0.0))
        throw InvalidArgument("train_block: learning rate must be positive");

    const auto [r0, r1] =
        block_range(adapters.layout, static_cast<std::size_t>(block) + 1);
    const Activation act = Activation::for_block(block);
    GradRequest request;
    request.lora_block = block;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (const auto& seq : corpus) {
            for_each_example(seq, model.context_window,
                             [&](std::span<const int> ctx, int target) {
                BackwardResult grads =
                    backward(model, ctx, target, &adapters, act, request);
                apply_block_cols(adapters.hidden.b, r0, r1, grads.d_hidden_b,
                                 options.learning_rate);
                apply_block_rows(adapters.hidden.a, r0, r1, grads.d_hidden_a,
                                 options.learning_rate);
                apply_block_cols(adapters.output.b, r0, r1, grads.d_output_b,
                                 options.learning_rate);
                apply_block_rows(adapters.output.a, r0, r1, grads.d_output_a,
                                 options.learning_rate);
            });
        }
    }
    require_finite(adapters.hidden.b, "adapter hidden B");
    require_finite(adapters.hidden.a, "adapter hidden A");
    require_finite(adapters.output.b, "adapter output B");
    require_finite(adapters.output.a, "adapter output A");
    adapters.trained_blocks.insert(block);
}

}  // namespace

void train_block(AdapterSet& adapters, const ModelState& model, int block,
                 const std::vector<TokenSequence>& corpus, const TrainOptions& options) {
    if (adapters.mode != AdapterMode::partitioned)
        throw InvalidArgument("train_block: adapter set is not in partitioned mode");
    train_block_impl(adapters, model, block, corpus, options);
}

void train_shared_baseline(AdapterSet& adapters, const ModelState& model,
                           const std::vector<std::vector<TokenSequence>>& corpora,
                           const TrainOptions& options) {
    if (adapters.mode != AdapterMode::shared_baseline)
        throw InvalidArgument("shared baseline: adapter set is not in shared-baseline mode");
    if (adapters.layout.capacity != 1)
        throw InvalidArgument("shared baseline: layout must hold a single block");
    for (const auto& corpus : corpora) train_block_impl(adapters, model, 0, corpus, options);
}

}  // namespace rolecast
