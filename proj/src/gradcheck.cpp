// SPDX-License-Identifier: Apache-2.0

#include "rolecast/gradcheck.hpp"

#include "rolecast/backbone.hpp"
#include "rolecast/gating.hpp"
#include "rolecast/lora.hpp"
#include "rolecast/numerics.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

namespace {

// Block-slice gradients embedded into a full-size matrix; entries outside
// the active block must have exactly zero gradient.
Matrix embed_cols(const Matrix& slice, std::size_t full_cols, std::size_t c0) {
    Matrix full(slice.rows, full_cols, 0.0);
    for (std::size_t i = 0; i < slice.rows; ++i)
        for (std::size_t j = 0; j < slice.cols; ++j) full.at(i, c0 + j) = slice.at(i, j);
    return full;
}

Matrix embed_rows(const Matrix& slice, std::size_t full_rows, std::size_t r0) {
    Matrix full(full_rows, slice.cols, 0.0);
    for (std::size_t i = 0; i < slice.rows; ++i)
        for (std::size_t j = 0; j < slice.cols; ++j) full.at(r0 + i, j) = slice.at(i, j);
    return full;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(std::size_t seeds, double step,
                                                 std::uint64_t base_seed) {
    std::vector<GradCheckResult> results;
    const std::vector<std::string> words = {"ona", "dua", "tri", "vor", "fim"};

    for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t seed = derive_seed(base_seed, "gradcheck", s);
        RandomStream rng(seed);

        ModelState model;
        model.vocab = Vocabulary::build(words);
        model.context_window = 4;
        model.d_model = 4;
        model.embedding = gaussian_matrix(model.vocab.size(), model.d_model, 0.6, rng);
        model.hidden = gaussian_matrix(model.d_model, model.d_model, 0.6, rng);
        model.output = gaussian_matrix(model.vocab.size(), model.d_model, 0.6, rng);
        model.frozen = true;

        const BlockLayout layout = BlockLayout::create(2, 2, 2.0);
        AdapterSet adapters;
        adapters.layout = layout;
        adapters.mode = AdapterMode::partitioned;
        // Non-zero factors so every gradient path is exercised.
        adapters.hidden.b =
            gaussian_matrix(model.d_model, layout.total_rank(), 0.5, rng);
        adapters.hidden.a =
            gaussian_matrix(layout.total_rank(), model.d_model, 0.5, rng);
        adapters.output.b =
            gaussian_matrix(model.vocab.size(), layout.total_rank(), 0.5, rng);
        adapters.output.a =
            gaussian_matrix(layout.total_rank(), model.d_model, 0.5, rng);

        std::vector<int> ctx;
        const std::size_t ctx_len = 1 + rng.uniform_index(model.context_window);
        for (std::size_t i = 0; i < ctx_len; ++i)
            ctx.push_back(static_cast<int>(rng.uniform_index(model.vocab.size())));
        const int target = static_cast<int>(rng.uniform_index(model.vocab.size()));
        const int block = static_cast<int>(rng.uniform_index(layout.capacity));
        const Activation act = Activation::for_block(block);
        const auto [r0, r1] = block_range(layout, static_cast<std::size_t>(block) + 1);

        GradRequest request;
        request.backbone = true;
        request.lora_block = block;
        const BackwardResult analytic =
            backward(model, ctx, target, &adapters, act, request);

        auto check = [&](const std::string& component, const Matrix& analytic_grad,
                         const Matrix& point, auto&& loss_of) {
            const Matrix fd = finite_diff_grad(loss_of, point, step);
            GradCheckResult r;
            r.component = component;
            r.seed = seed;
            r.max_relative_error = max_relative_error(analytic_grad, fd);
            results.push_back(std::move(r));
        };

        check("backbone.embedding", analytic.d_embedding, model.embedding,
              [&](const Matrix& probe) {
                  ModelState m = model;
                  m.embedding = probe;
                  return example_loss(m, ctx, target, &adapters, act);
              });
        check("backbone.hidden", analytic.d_hidden, model.hidden,
              [&](const Matrix& probe) {
                  ModelState m = model;
                  m.hidden = probe;
                  return example_loss(m, ctx, target, &adapters, act);
              });
        check("backbone.output", analytic.d_output, model.output,
              [&](const Matrix& probe) {
                  ModelState m = model;
                  m.output = probe;
                  return example_loss(m, ctx, target, &adapters, act);
              });
        check("lora.hidden.b", embed_cols(analytic.d_hidden_b, layout.total_rank(), r0),
              adapters.hidden.b, [&](const Matrix& probe) {
                  AdapterSet a = adapters;
                  a.hidden.b = probe;
                  return example_loss(model, ctx, target, &a, act);
              });
        check("lora.hidden.a", embed_rows(analytic.d_hidden_a, layout.total_rank(), r0),
              adapters.hidden.a, [&](const Matrix& probe) {
                  AdapterSet a = adapters;
                  a.hidden.a = probe;
                  return example_loss(model, ctx, target, &a, act);
              });
        check("lora.output.b", embed_cols(analytic.d_output_b, layout.total_rank(), r0),
              adapters.output.b, [&](const Matrix& probe) {
                  AdapterSet a = adapters;
                  a.output.b = probe;
                  return example_loss(model, ctx, target, &a, act);
              });
        check("lora.output.a", embed_rows(analytic.d_output_a, layout.total_rank(), r0),
              adapters.output.a, [&](const Matrix& probe) {
                  AdapterSet a = adapters;
                  a.output.a = probe;
                  return example_loss(model, ctx, target, &a, act);
              });

        // Gate: cross-entropy of softmax(W^T e) against a target block.
        const std::size_t d_embed = 6;
        std::vector<double> e(d_embed);
        for (double& v : e) v = rng.normal(0.0, 1.0);
        const double norm = l2_norm(e);
        for (double& v : e) v /= norm;
        Matrix gate_w = gaussian_matrix(d_embed, layout.capacity, 0.5, rng);
        const int gate_target = block;

        std::vector<double> g = softmax(matvec_transposed(gate_w, e)).values();
        g[static_cast<std::size_t>(gate_target)] -= 1.0;
        Matrix gate_grad(d_embed, layout.capacity);
        add_outer(gate_grad, e, g, 1.0);
        check("gate.weights", gate_grad, gate_w, [&](const Matrix& probe) {
            return cross_entropy(softmax(matvec_transposed(probe, e)),
                                 static_cast<std::size_t>(gate_target));
        });
    }
    return results;
}

double worst_relative_error(const std::vector<GradCheckResult>& results) {
    double worst = 0.0;
    for (const auto& r : results) worst = std::max(worst, r.max_relative_error);
    return worst;
}

}  // namespace rolecast
