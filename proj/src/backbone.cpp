// SPDX-License-Identifier: Apache-2.0

#include "rolecast/backbone.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

Vocabulary Vocabulary::build(std::span<const std::string> words) {
    Vocabulary v;
    v.tokens = {"<bos>", "<eos>", "<unk>"};
    for (const auto& w : words) {
        if (w.empty()) throw InvalidArgument("vocabulary: empty token");
        if (std::find(v.tokens.begin(), v.tokens.end(), w) != v.tokens.end())
            throw InvalidArgument("vocabulary: duplicate token '" + w + "'");
        v.tokens.push_back(w);
    }
    if (v.tokens.size() < 4) throw InvalidArgument("vocabulary: need at least 4 tokens");
    for (std::size_t i = 0; i < v.tokens.size(); ++i)
        v.ids.emplace(v.tokens[i], static_cast<int>(i));
    return v;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size())
        throw InvalidArgument("vocabulary: token id out of range");
    return tokens[static_cast<std::size_t>(id)];
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSequence seq;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            seq.ids.push_back(vocab.lookup(word));
            word.clear();
        }
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return seq;
}

std::string detokenize(std::span<const int> ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += vocab.token(ids[i]);
    }
    return out;
}

std::uint64_t model_digest(const ModelState& model) {
    std::uint64_t h = 0xa4093822299f31d0ull;
    h ^= mix64(matrix_digest(model.embedding));
    h ^= mix64(matrix_digest(model.hidden) + 1);
    h ^= mix64(matrix_digest(model.output) + 2);
    return h;
}

namespace {

struct ForwardCache {
    std::vector<double> pooled;  // mean embedding, d
    std::vector<double> pre;     // hidden pre-activation, d
    std::vector<double> act;     // tanh(pre), d
    std::vector<double> logits;  // V
};

ForwardCache run_forward(const ModelState& model, std::span<const int> ctx,
                         const AdapterSet* adapters, const Activation& act) {
    if (ctx.empty()) throw InvalidArgument("forward: empty context");
    if (ctx.size() > model.context_window)
        throw InvalidArgument("forward: context longer than window");
    for (int id : ctx)
        if (id < 0 || static_cast<std::size_t>(id) >= model.vocab.size())
            throw InvalidArgument("forward: token id out of range");

    ForwardCache cache;
    cache.pooled.assign(model.d_model, 0.0);
    for (int id : ctx) {
        auto row = model.embedding.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < model.d_model; ++j) cache.pooled[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(ctx.size());
    for (double& v : cache.pooled) v *= inv;

    cache.pre = matvec(model.hidden, cache.pooled);
    if (adapters) add_lora_delta(cache.pre, adapters->hidden, adapters->layout, act, cache.pooled);

    cache.act.resize(model.d_model);
    for (std::size_t j = 0; j < model.d_model; ++j) cache.act[j] = std::tanh(cache.pre[j]);

    cache.logits = matvec(model.output, cache.act);
    if (adapters) add_lora_delta(cache.logits, adapters->output, adapters->layout, act, cache.act);
    return cache;
}

// t = A_k x, u = B_k^T g for the block slices.
std::vector<double> block_rows_matvec(const Matrix& a, std::size_t r0, std::size_t r1,
                                      std::span<const double> x) {
    std::vector<double> t(r1 - r0, 0.0);
    for (std::size_t r = r0; r < r1; ++r) {
        double acc = 0.0;
        const double* row = a.data.data() + r * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) acc += row[j] * x[j];
        t[r - r0] = acc;
    }
    return t;
}

std::vector<double> block_cols_tmatvec(const Matrix& b, std::size_t c0, std::size_t c1,
                                       std::span<const double> g) {
    std::vector<double> u(c1 - c0, 0.0);
    for (std::size_t i = 0; i < b.rows; ++i) {
        const double gi = g[i];
        const double* row = b.data.data() + i * b.cols;
        for (std::size_t c = c0; c < c1; ++c) u[c - c0] += row[c] * gi;
    }
    return u;
}

}  // namespace

std::vector<double> forward_logits(const ModelState& model, std::span<const int> ctx,
                                   const AdapterSet* adapters, const Activation& act) {
    return run_forward(model, ctx, adapters, act).logits;
}

std::size_t sample_next(std::span<const double> logits, double temperature,
                        std::uint64_t seed) {
    if (logits.empty()) throw InvalidArgument("sample_next: empty logits");
    for (double v : logits)
        if (!std::isfinite(v)) throw InvalidArgument("sample_next: non-finite logits");
    if (temperature < 0.0) throw InvalidArgument("sample_next: negative temperature");
    if (temperature == 0.0) return argmax_lowest(logits);
    std::vector<double> scaled(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
    const ProbVector probs = softmax(scaled);
    RandomStream rng(seed);
    return rng.categorical(probs.values());
}

double example_loss(const ModelState& model, std::span<const int> ctx, int target,
                    const AdapterSet* adapters, const Activation& act) {
    const ForwardCache cache = run_forward(model, ctx, adapters, act);
    return cross_entropy(softmax(cache.logits), static_cast<std::size_t>(target));
}

BackwardResult backward(const ModelState& model, std::span<const int> ctx, int target,
                        const AdapterSet* adapters, const Activation& act,
                        const GradRequest& request) {
    if (target < 0 || static_cast<std::size_t>(target) >= model.vocab.size())
        throw InvalidArgument("backward: target out of range");
    if (request.lora_block >= 0) {
        if (!adapters) throw InvalidArgument("backward: block gradients need adapters");
        if (act.kind != Activation::Kind::block || act.block != request.lora_block)
            throw InvalidArgument("backward: requested block must be the active block");
    }

    const ForwardCache cache = run_forward(model, ctx, adapters, act);
    const ProbVector probs = softmax(cache.logits);

    BackwardResult out;
    out.loss = cross_entropy(probs, static_cast<std::size_t>(target));

    // d logits
    std::vector<double> g = probs.values();
    g[static_cast<std::size_t>(target)] -= 1.0;

    const double scale = adapters ? adapters->layout.block_scale() : 0.0;
    std::size_t r0 = 0, r1 = 0;
    if (request.lora_block >= 0) {
        std::tie(r0, r1) = block_range(adapters->layout,
                                       static_cast<std::size_t>(request.lora_block) + 1);
    }

    if (request.backbone) {
        out.d_output = Matrix(model.output.rows, model.output.cols);
        add_outer(out.d_output, g, cache.act, 1.0);
    }
    if (request.lora_block >= 0) {
        const auto& mod = adapters->output;
        const std::vector<double> t = block_rows_matvec(mod.a, r0, r1, cache.act);
        const std::vector<double> u = block_cols_tmatvec(mod.b, r0, r1, g);
        out.d_output_b = Matrix(mod.b.rows, r1 - r0);
        add_outer(out.d_output_b, g, t, scale);
        out.d_output_a = Matrix(r1 - r0, mod.a.cols);
        add_outer(out.d_output_a, u, cache.act, scale);
    }

    // dh through the output projection (base + adapter path)
    std::vector<double> dh = matvec_transposed(model.output, g);
    if (adapters && act.kind != Activation::Kind::none) {
        // d/dh of sum over active blocks of w_k * s * B_k A_k h
        auto add_block_dh = [&](std::size_t k, double w) {
            const auto [b0, b1] = block_range(adapters->layout, k + 1);
            const std::vector<double> u = block_cols_tmatvec(adapters->output.b, b0, b1, g);
            for (std::size_t r = b0; r < b1; ++r) {
                const double* row = adapters->output.a.data.data() + r * adapters->output.a.cols;
                const double ur = u[r - b0] * w * adapters->layout.block_scale();
                for (std::size_t j = 0; j < model.d_model; ++j) dh[j] += ur * row[j];
            }
        };
        if (act.kind == Activation::Kind::block) {
            add_block_dh(static_cast<std::size_t>(act.block), 1.0);
        } else {
            for (std::size_t k = 0; k < act.weights.size(); ++k)
                if (act.weights[k] != 0.0) add_block_dh(k, act.weights[k]);
        }
    }

    // dz through tanh
    std::vector<double> dz(model.d_model);
    for (std::size_t j = 0; j < model.d_model; ++j)
        dz[j] = dh[j] * (1.0 - cache.act[j] * cache.act[j]);

    if (request.backbone) {
        out.d_hidden = Matrix(model.hidden.rows, model.hidden.cols);
        add_outer(out.d_hidden, dz, cache.pooled, 1.0);
    }
    if (request.lora_block >= 0) {
        const auto& mod = adapters->hidden;
        const std::vector<double> t = block_rows_matvec(mod.a, r0, r1, cache.pooled);
        const std::vector<double> u = block_cols_tmatvec(mod.b, r0, r1, dz);
        out.d_hidden_b = Matrix(mod.b.rows, r1 - r0);
        add_outer(out.d_hidden_b, dz, t, scale);
        out.d_hidden_a = Matrix(r1 - r0, mod.a.cols);
        add_outer(out.d_hidden_a, u, cache.pooled, scale);
    }

    if (request.backbone) {
        std::vector<double> dpool = matvec_transposed(model.hidden, dz);
        if (adapters && act.kind != Activation::Kind::none) {
            auto add_block_dpool = [&](std::size_t k, double w) {
                const auto [b0, b1] = block_range(adapters->layout, k + 1);
                const std::vector<double> u = block_cols_tmatvec(adapters->hidden.b, b0, b1, dz);
                for (std::size_t r = b0; r < b1; ++r) {
                    const double* row =
                        adapters->hidden.a.data.data() + r * adapters->hidden.a.cols;
                    const double ur = u[r - b0] * w * adapters->layout.block_scale();
                    for (std::size_t j = 0; j < model.d_model; ++j) dpool[j] += ur * row[j];
                }
            };
            if (act.kind == Activation::Kind::block) {
                add_block_dpool(static_cast<std::size_t>(act.block), 1.0);
            } else {
                for (std::size_t k = 0; k < act.weights.size(); ++k)
                    if (act.weights[k] != 0.0) add_block_dpool(k, act.weights[k]);
            }
        }
        out.d_embedding = Matrix(model.embedding.rows, model.embedding.cols);
        const double inv = 1.0 / static_cast<double>(ctx.size());
        for (int id : ctx) {
            double* row = out.d_embedding.data.data() +
                          static_cast<std::size_t>(id) * model.d_model;
            for (std::size_t j = 0; j < model.d_model; ++j) row[j] += inv * dpool[j];
        }
    }
    return out;
}

double mean_corpus_loss(const ModelState& model,
                        const std::vector<TokenSequence>& sequences,
                        const AdapterSet* adapters, const Activation& act) {
    if (sequences.empty()) throw InvalidArgument("mean_corpus_loss: empty corpus");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seq : sequences) {
        for_each_example(seq, model.context_window, [&](std::span<const int> ctx, int target) {
            total += example_loss(model, ctx, target, adapters, act);
            ++count;
        });
    }
    if (count == 0) throw InvalidArgument("mean_corpus_loss: corpus has no examples");
    return total / static_cast<double>(count);
}

ModelState pretrain_base(const std::vector<TokenSequence>& corpus,
                         const Vocabulary& vocab, const PretrainOptions& options) {
    if (corpus.empty()) throw InvalidArgument("pretrain: empty corpus");

    ModelState model;
    model.vocab = vocab;
    model.context_window = options.context_window;
    model.d_model = options.d_model;

    // Tokens that never occur in a training context keep zero embeddings,
    // so their later appearance in chat contexts only rescales the pool.
    std::set<int> seen{Vocabulary::kBos};
    for (const auto& seq : corpus)
        for (int id : seq.ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
                throw InvalidArgument("pretrain: token id out of range");
            seen.insert(id);
        }

    RandomStream rng(derive_seed(options.seed, "backbone-init"));
    Matrix emb = gaussian_matrix(vocab.size(), options.d_model,
                                 options.embedding_init_stddev, rng);
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (!seen.count(static_cast<int>(i)))
            for (std::size_t j = 0; j < options.d_model; ++j) emb.at(i, j) = 0.0;
    model.embedding = std::move(emb);
    model.hidden = gaussian_matrix(options.d_model, options.d_model,
                                   options.hidden_init_stddev, rng);
    model.output = Matrix(vocab.size(), options.d_model, 0.0);

    GradRequest request;
    request.backbone = true;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (const auto& seq : corpus) {
            for_each_example(seq, model.context_window,
                             [&](std::span<const int> ctx, int target) {
                BackwardResult grads =
                    backward(model, ctx, target, nullptr, Activation::none(), request);
                add_scaled(model.embedding, grads.d_embedding, -options.learning_rate);
                add_scaled(model.hidden, grads.d_hidden, -options.learning_rate);
                add_scaled(model.output, grads.d_output, -options.learning_rate);
            });
        }
    }
    require_finite(model.embedding, "backbone embedding");
    require_finite(model.hidden, "backbone hidden");
    require_finite(model.output, "backbone output");
    model.frozen = true;
    return model;
}

}  // namespace rolecast
