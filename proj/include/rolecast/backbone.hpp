// SPDX-License-Identifier: Apache-2.0
//
// The frozen next-token predictor the adapters attach to: mean-pooled
// token embeddings over a fixed context window, one tanh hidden layer,
// and an output projection. The hidden and output matrices are the two
// adaptation targets; forward optionally runs through an AdapterSet.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rolecast/lora.hpp"
#include "rolecast/numerics.hpp"

namespace rolecast {

struct Vocabulary {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;

    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;

    // Prepends the special tokens, then keeps the given words in first
    // occurrence order. Duplicates among the words are rejected.
    static Vocabulary build(std::span<const std::string> words);

    int lookup(const std::string& token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens.size(); }
};

struct TokenSequence {
    std::vector<int> ids;
};

// Whitespace-split, lowercased; unknown words map to UNK.
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(std::span<const int> ids, const Vocabulary& vocab);

struct ModelState {
    Vocabulary vocab;
    std::size_t context_window = 8;
    std::size_t d_model = 32;
    Matrix embedding;  // V x d
    Matrix hidden;     // d x d
    Matrix output;     // V x d
    bool frozen = false;
};

// Concatenated bytes of all weight matrices; used for frozen-invariance
// checks and checkpoint digests.
std::uint64_t model_digest(const ModelState& model);

// Logits over the vocabulary. ctx must be non-empty and at most
// context_window long; pass adapters + activation for the adapted path.
std::vector<double> forward_logits(const ModelState& model, std::span<const int> ctx,
                                   const AdapterSet* adapters = nullptr,
                                   const Activation& act = Activation::none());

// temperature == 0 is exact argmax with lowest-index tie-break; otherwise a
// seeded categorical draw from softmax(logits / temperature).
std::size_t sample_next(std::span<const double> logits, double temperature,
                        std::uint64_t seed);

struct PretrainOptions {
    std::size_t context_window = 8;
    std::size_t d_model = 32;
    double learning_rate = 0.05;
    std::size_t epochs = 8;
    double embedding_init_stddev = 0.3;
    double hidden_init_stddev = 0.3;
    std::uint64_t seed = 0;
};

// Trains all layers by per-example SGD on next-token cross-entropy, then
// freezes the state. Deterministic given the seed.
ModelState pretrain_base(const std::vector<TokenSequence>& corpus,
                         const Vocabulary& vocab, const PretrainOptions& options);

// Enumerates next-token examples of a sequence: contexts are rooted at BOS,
// truncated to the window from the left, and the final target is EOS.
template <typename Fn>
void for_each_example(const TokenSequence& seq, std::size_t window, Fn&& fn) {
    std::vector<int> extended;
    extended.reserve(seq.ids.size() + 2);
    extended.push_back(Vocabulary::kBos);
    extended.insert(extended.end(), seq.ids.begin(), seq.ids.end());
    extended.push_back(Vocabulary::kEos);
    for (std::size_t t = 1; t < extended.size(); ++t) {
        const std::size_t start = t > window ? t - window : 0;
        fn(std::span<const int>(extended.data() + start, t - start), extended[t]);
    }
}

struct GradRequest {
    bool backbone = false;
    // When >= 0, also produce the gradients of the active block's B/A
    // slices in both adapter modules (requires adapters and a block
    // activation of the same index).
    int lora_block = -1;
};

struct BackwardResult {
    double loss = 0.0;
    Matrix d_embedding, d_hidden, d_output;            // when backbone requested
    Matrix d_hidden_b, d_hidden_a, d_output_b, d_output_a;  // block slices
};

double example_loss(const ModelState& model, std::span<const int> ctx, int target,
                    const AdapterSet* adapters = nullptr,
                    const Activation& act = Activation::none());

BackwardResult backward(const ModelState& model, std::span<const int> ctx, int target,
                        const AdapterSet* adapters, const Activation& act,
                        const GradRequest& request);

// Mean next-token cross-entropy over all examples of all sequences.
double mean_corpus_loss(const ModelState& model,
                        const std::vector<TokenSequence>& sequences,
                        const AdapterSet* adapters = nullptr,
                        const Activation& act = Activation::none());

}  // namespace rolecast
