// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <doctest.h>

#include "rolecast/errors.hpp"
#include "rolecast/lora.hpp"
#include "rolecast/lora_train.hpp"
#include "rolecast/rng.hpp"
#include "test_util.hpp"

using namespace rolecast;
using testutil::make_mini_world;

TEST_CASE("block_range slices") {
    CHECK(block_range(1, 4) == std::pair<std::size_t, std::size_t>{0, 4});
    CHECK(block_range(2, 4) == std::pair<std::size_t, std::size_t>{4, 8});
    CHECK_THROWS_AS(block_range(0, 4), InvalidArgument);

    const BlockLayout layout = BlockLayout::create(8, 4, 4.0);
    CHECK(layout.total_rank() == 32);
    CHECK(block_range(layout, 8).second == 32);
    CHECK_THROWS_AS(block_range(layout, 9), InvalidArgument);
}

TEST_CASE("layout capacity law") {
    CHECK_THROWS_AS(BlockLayout::create(0, 4, 4.0), InvalidArgument);
    CHECK_THROWS_AS(BlockLayout::create(4, 0, 4.0), InvalidArgument);
    CHECK_THROWS_AS(BlockLayout::with_total_rank(8, 4, 4.0, 31), InvalidArgument);
    CHECK(BlockLayout::with_total_rank(8, 4, 4.0, 32).capacity == 8);
}

TEST_CASE("fresh adapter is an exact identity for every block") {
    RandomStream rng(5);
    const BlockLayout layout = BlockLayout::create(3, 2, 2.0);
    const LoraModule module = LoraModule::init(5, 4, layout, 0.02, 9);
    const Matrix w0 = gaussian_matrix(5, 4, 1.0, rng);
    std::vector<double> x(4);
    for (double& v : x) v = rng.normal(0.0, 1.0);

    const std::vector<double> base = matvec(w0, x);
    for (int block = 0; block < 3; ++block) {
        const auto adapted = lora_forward(w0, module, layout, Activation::for_block(block), x);
        CHECK(adapted == base);
    }
}

TEST_CASE("one-hot fusion reproduces single-block inference") {
    RandomStream rng(6);
    const BlockLayout layout = BlockLayout::create(4, 2, 2.0);
    LoraModule module = LoraModule::init(6, 5, layout, 0.02, 10);
    // dirty the factors so the check is non-trivial
    module.b = gaussian_matrix(6, layout.total_rank(), 0.7, rng);
    module.a = gaussian_matrix(layout.total_rank(), 5, 0.7, rng);
    const Matrix w0 = gaussian_matrix(6, 5, 1.0, rng);

    for (int block = 0; block < 4; ++block) {
        std::vector<double> weights(4, 0.0);
        weights[static_cast<std::size_t>(block)] = 1.0;
        const Activation fusion = Activation::fuse(ProbVector::from_raw(weights));

        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> x(5);
            for (double& v : x) v = rng.normal(0.0, 1.0);
            const auto single = lora_forward(w0, module, layout, Activation::for_block(block), x);
            const auto fused = lora_forward(w0, module, layout, fusion, x);
            REQUIRE(single.size() == fused.size());
            for (std::size_t i = 0; i < single.size(); ++i)
                CHECK(std::abs(single[i] - fused[i]) < 1e-12);
        }
    }
}

TEST_CASE("training a block touches only its slices") {
    auto world = make_mini_world(3);
    const BlockLayout layout = BlockLayout::create(3, 2, 2.0);
    AdapterSet adapters = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           layout, AdapterMode::partitioned, 0.02, 31);

    const Matrix hb = adapters.hidden.b, ha = adapters.hidden.a;
    const Matrix ob = adapters.output.b, oa = adapters.output.a;

    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 5;
    train_block(adapters, world.model, 1, world.train[1], options);

    const auto [r0, r1] = block_range(layout, 2);
    auto cols_match_outside = [&](const Matrix& before, const Matrix& after) {
        for (std::size_t i = 0; i < before.rows; ++i)
            for (std::size_t c = 0; c < before.cols; ++c)
                if (c < r0 || c >= r1) {
                    if (before.at(i, c) != after.at(i, c)) return false;
                }
        return true;
    };
    auto rows_match_outside = [&](const Matrix& before, const Matrix& after) {
        for (std::size_t r = 0; r < before.rows; ++r)
            if (r < r0 || r >= r1) {
                for (std::size_t j = 0; j < before.cols; ++j)
                    if (before.at(r, j) != after.at(r, j)) return false;
            }
        return true;
    };
    CHECK(cols_match_outside(hb, adapters.hidden.b));
    CHECK(rows_match_outside(ha, adapters.hidden.a));
    CHECK(cols_match_outside(ob, adapters.output.b));
    CHECK(rows_match_outside(oa, adapters.output.a));
    CHECK(adapters.is_trained(1));
    CHECK_FALSE(adapters.is_trained(0));
}

TEST_CASE("training improves the trained role and cannot move others") {
    auto world = make_mini_world(2);
    const BlockLayout layout = BlockLayout::create(2, 2, 2.0);
    AdapterSet adapters = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           layout, AdapterMode::partitioned, 0.02, 32);

    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 8;

    const double role0_before =
        mean_corpus_loss(world.model, world.heldout[0], &adapters, Activation::for_block(0));
    train_block(adapters, world.model, 0, world.train[0], options);
    const double role0_after =
        mean_corpus_loss(world.model, world.heldout[0], &adapters, Activation::for_block(0));
    CHECK(role0_after < role0_before);

    // training role 1 leaves role 0's entire forward path untouched
    const double role0_snapshot = role0_after;
    std::vector<std::vector<double>> outputs_before;
    RandomStream rng(77);
    std::vector<std::vector<double>> probes;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> x(world.model.d_model);
        for (double& v : x) v = rng.normal(0.0, 1.0);
        probes.push_back(x);
        outputs_before.push_back(lora_forward(world.model.hidden, adapters.hidden, layout,
                                              Activation::for_block(0), x));
    }

    train_block(adapters, world.model, 1, world.train[1], options);
    const double role0_retest =
        mean_corpus_loss(world.model, world.heldout[0], &adapters, Activation::for_block(0));
    CHECK(role0_retest == role0_snapshot);  // exactly zero change

    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto out = lora_forward(world.model.hidden, adapters.hidden, layout,
                                      Activation::for_block(0), probes[i]);
        CHECK(out == outputs_before[i]);
    }
}

TEST_CASE("distinct trained blocks produce distinct outputs") {
    auto world = make_mini_world(2);
    const BlockLayout layout = BlockLayout::create(2, 2, 2.0);
    AdapterSet adapters = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           layout, AdapterMode::partitioned, 0.02, 33);
    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 8;
    train_block(adapters, world.model, 0, world.train[0], options);
    train_block(adapters, world.model, 1, world.train[1], options);

    const std::vector<int> ctx = {Vocabulary::kBos, 3, 4};
    const auto out0 = forward_logits(world.model, ctx, &adapters, Activation::for_block(0));
    const auto out1 = forward_logits(world.model, ctx, &adapters, Activation::for_block(1));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < out0.size(); ++i)
        max_diff = std::max(max_diff, std::abs(out0[i] - out1[i]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("train_block validates input") {
    auto world = make_mini_world(2);
    const BlockLayout layout = BlockLayout::create(2, 2, 2.0);
    AdapterSet adapters = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           layout, AdapterMode::partitioned, 0.02, 34);
    TrainOptions options;
    CHECK_THROWS_AS(train_block(adapters, world.model, 5, world.train[0], options),
                    InvalidArgument);
    CHECK_THROWS_AS(train_block(adapters, world.model, 0, {}, options), InvalidArgument);

    AdapterSet baseline = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           BlockLayout::create(1, 4, 4.0),
                                           AdapterMode::shared_baseline, 0.02, 35);
    CHECK_THROWS_AS(train_block(baseline, world.model, 0, world.train[0], options),
                    InvalidArgument);
    CHECK_THROWS_AS(train_shared_baseline(adapters, world.model, {world.train[0]}, options),
                    InvalidArgument);
}

TEST_CASE("shared baseline single corpus equals one-block training") {
    auto world = make_mini_world(2);
    const BlockLayout layout = BlockLayout::create(1, 4, 4.0);
    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 5;

    AdapterSet partitioned = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                              layout, AdapterMode::partitioned, 0.02, 36);
    AdapterSet baseline = partitioned;
    baseline.mode = AdapterMode::shared_baseline;

    train_block(partitioned, world.model, 0, world.train[0], options);
    train_shared_baseline(baseline, world.model, {world.train[0]}, options);

    CHECK(bit_identical(partitioned.hidden.b, baseline.hidden.b));
    CHECK(bit_identical(partitioned.hidden.a, baseline.hidden.a));
    CHECK(bit_identical(partitioned.output.b, baseline.output.b));
    CHECK(bit_identical(partitioned.output.a, baseline.output.a));
}

TEST_CASE("sequential shared-baseline training forgets the first role") {
    auto world = make_mini_world(2);
    AdapterSet baseline = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           BlockLayout::create(1, 4, 4.0),
                                           AdapterMode::shared_baseline, 0.02, 37);
    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 8;

    train_shared_baseline(baseline, world.model, {world.train[0]}, options);
    const double role0_after_own =
        mean_corpus_loss(world.model, world.heldout[0], &baseline, Activation::for_block(0));
    train_shared_baseline(baseline, world.model, {world.train[1]}, options);
    const double role0_after_other =
        mean_corpus_loss(world.model, world.heldout[0], &baseline, Activation::for_block(0));
    CHECK(role0_after_other > role0_after_own);
}

TEST_CASE("frozen backbone bytes never change during adapter training") {
    auto world = make_mini_world(2);
    const std::uint64_t before = model_digest(world.model);
    AdapterSet adapters = AdapterSet::init(world.model.d_model, world.vocab.size(),
                                           BlockLayout::create(2, 2, 2.0),
                                           AdapterMode::partitioned, 0.02, 38);
    TrainOptions options;
    options.learning_rate = 0.05;
    options.epochs = 4;
    train_block(adapters, world.model, 0, world.train[0], options);
    train_block(adapters, world.model, 1, world.train[1], options);
    CHECK(model_digest(world.model) == before);
}

TEST_CASE("expand appends an empty block and preserves old bytes") {
    RandomStream rng(4);
    AdapterSet adapters = AdapterSet::init(6, 10, BlockLayout::create(2, 2, 2.0),
                                           AdapterMode::partitioned, 0.02, 39);
    adapters.hidden.b = gaussian_matrix(6, 4, 0.5, rng);
    adapters.output.b = gaussian_matrix(10, 4, 0.5, rng);
    const auto digests = all_block_digests(adapters);

    adapters.expand(0.02, 91);
    CHECK(adapters.layout.capacity == 3);
    CHECK(adapters.layout.total_rank() == 6);
    CHECK(adapters.hidden.b.cols == 6);
    CHECK(adapters.hidden.a.rows == 6);

    const auto grown = all_block_digests(adapters);
    CHECK(grown[0] == digests[0]);
    CHECK(grown[1] == digests[1]);
    // new block: zero B columns, Gaussian A rows
    for (std::size_t i = 0; i < adapters.hidden.b.rows; ++i)
        for (std::size_t c = 4; c < 6; ++c) CHECK(adapters.hidden.b.at(i, c) == 0.0);
}
