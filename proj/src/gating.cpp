// SPDX-License-Identifier: Apache-2.0

#include "rolecast/gating.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

std::string canonical_prompt_for(const std::string& name) {
    return "I want you to act like " + name + ". I want you to respond and answer like " +
           name + ", using the tone, manner and vocabulary " + name +
           " would use. You must know all of the knowledge of " + name + ".";
}

std::vector<std::string> embed_tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        std::size_t b = 0;
        std::size_t e = word.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(word[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(word[e - 1]))) --e;
        if (e > b) out.push_back(word.substr(b, e - b));
        word.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return out;
}

namespace {

std::vector<double> embed_tokens(const std::vector<std::string>& tokens,
                                 std::size_t d_embed, std::uint64_t seed) {
    std::vector<double> v(d_embed, 0.0);
    for (const auto& tok : tokens) {
        const std::uint64_t h = mix64(fnv1a64(tok) ^ mix64(seed));
        const std::size_t idx = static_cast<std::size_t>((h >> 1) % d_embed);
        v[idx] += (h & 1) ? 1.0 : -1.0;
    }
    const double norm = l2_norm(v);
    if (norm == 0.0) {
        v.assign(d_embed, 0.0);
        v[0] = 1.0;
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

}  // namespace

std::vector<double> embed_profile(const std::string& text, std::size_t d_embed,
                                  std::uint64_t seed) {
    if (d_embed < 2) throw InvalidArgument("embed_profile: d_embed must be >= 2");
    return embed_tokens(embed_tokenize(text), d_embed, seed);
}

ProbVector GateState::block_weights(std::span<const double> embedding) const {
    if (embedding.size() != weights.rows)
        throw InvalidArgument("gate: embedding dimension mismatch");
    return softmax(matvec_transposed(weights, embedding));
}

void GateState::append_block_column() {
    Matrix grown(weights.rows, weights.cols + 1, 0.0);
    for (std::size_t i = 0; i < weights.rows; ++i)
        for (std::size_t j = 0; j < weights.cols; ++j) grown.at(i, j) = weights.at(i, j);
    weights = std::move(grown);
}

RoleRegistry RoleRegistry::create(std::size_t d_embed, std::uint64_t embed_seed) {
    if (d_embed < 2) throw InvalidArgument("registry: d_embed must be >= 2");
    RoleRegistry r;
    r.d_embed = d_embed;
    r.embed_seed = embed_seed;
    r.embeddings = Matrix(0, d_embed);
    return r;
}

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::optional<int> RoleRegistry::find(const std::string& name) const {
    const std::string needle = lowercase(name);
    for (std::size_t i = 0; i < roles.size(); ++i)
        if (lowercase(roles[i].profile.name) == needle) return static_cast<int>(i);
    return std::nullopt;
}

int register_role(RoleRegistry& registry, const GateState& gate,
                  const RoleProfile& profile, const Activation& activation) {
    if (profile.name.empty()) throw InvalidArgument("register_role: empty role name");
    if (registry.find(profile.name))
        throw ConflictError("register_role: duplicate role name '" + profile.name + "'");

    switch (activation.kind) {
        case Activation::Kind::block: {
            if (activation.block < 0 ||
                static_cast<std::size_t>(activation.block) >= gate.block_count())
                throw InvalidArgument("register_role: block index outside gate columns");
            for (const auto& record : registry.roles)
                if (record.activation.kind == Activation::Kind::block &&
                    record.activation.block == activation.block)
                    throw ConflictError("register_role: block " +
                                        std::to_string(activation.block) +
                                        " already assigned");
            break;
        }
        case Activation::Kind::fusion:
            if (activation.weights.size() > gate.block_count())
                throw InvalidArgument("register_role: fusion weights exceed gate columns");
            ProbVector::from_raw(activation.weights);  // validates
            break;
        case Activation::Kind::none:
            throw InvalidArgument("register_role: activation required");
    }

    RoleRecord record;
    record.profile = profile;
    if (record.profile.canonical_prompt.empty())
        record.profile.canonical_prompt = canonical_prompt_for(profile.name);
    record.activation = activation;

    const std::vector<double> e =
        embed_profile(record.profile.profile_text, registry.d_embed, registry.embed_seed);
    Matrix grown(registry.embeddings.rows + 1, registry.d_embed);
    std::copy(registry.embeddings.data.begin(), registry.embeddings.data.end(),
              grown.data.begin());
    std::copy(e.begin(), e.end(),
              grown.data.begin() + static_cast<std::ptrdiff_t>(registry.embeddings.size()));
    registry.embeddings = std::move(grown);
    registry.roles.push_back(std::move(record));
    return static_cast<int>(registry.roles.size()) - 1;
}

RouteResult route(const RoleRegistry& registry, const GateState& gate,
                  const std::string& instruction) {
    if (registry.empty()) throw NoRolesError("route: no roles registered");

    const std::vector<double> e =
        embed_profile(instruction, registry.d_embed, registry.embed_seed);

    RouteResult result;
    result.cosines.resize(registry.roles.size());
    // rows and the instruction embedding are unit vectors
    for (std::size_t i = 0; i < registry.roles.size(); ++i)
        result.cosines[i] = dot(registry.embeddings.row(i), e);
    result.role_index = static_cast<int>(argmax_lowest(result.cosines));
    result.best_cosine = result.cosines[static_cast<std::size_t>(result.role_index)];

    const auto retrieved = registry.embeddings.row(static_cast<std::size_t>(result.role_index));
    result.gate_weights = gate.block_weights(retrieved);
    result.gate_argmax =
        static_cast<int>(argmax_lowest(result.gate_weights.values()));

    const RoleRecord& record = registry.roles[static_cast<std::size_t>(result.role_index)];
    result.activation = record.activation;
    if (record.activation.kind == Activation::Kind::block)
        result.gate_agrees = (result.gate_argmax == record.activation.block);
    return result;
}

void train_gate(GateState& gate, std::span<const GateExample> examples,
                const GateTrainOptions& options) {
    if (examples.empty()) throw InvalidArgument("train_gate: no examples");
    const std::size_t d = gate.weights.rows;
    const std::size_t blocks = gate.block_count();
    for (const auto& ex : examples) {
        if (ex.embedding.size() != d)
            throw InvalidArgument("train_gate: embedding dimension mismatch");
        if (ex.target_block < 0 || static_cast<std::size_t>(ex.target_block) >= blocks)
            throw InvalidArgument("train_gate: target block out of range");
    }
    // Identical embeddings with different targets can never separate.
    for (std::size_t i = 0; i < examples.size(); ++i)
        for (std::size_t j = i + 1; j < examples.size(); ++j)
            if (examples[i].target_block != examples[j].target_block &&
                examples[i].embedding == examples[j].embedding)
                throw TrainingError("train_gate: identical embeddings with different targets");

    auto all_correct = [&](const Matrix& w) {
        GateState probe{w};
        for (const auto& ex : examples) {
            const ProbVector p = probe.block_weights(ex.embedding);
            if (argmax_lowest(p.values()) != static_cast<std::size_t>(ex.target_block))
                return false;
        }
        return true;
    };

    for (int attempt = 0; attempt < options.max_retries; ++attempt) {
        Matrix w(d, blocks);
        if (options.warm_start && attempt == 0) {
            w = gate.weights;
        } else {
            RandomStream rng(derive_seed(options.seed, "gate-init",
                                         static_cast<std::uint64_t>(attempt)));
            w = gaussian_matrix(d, blocks, options.init_stddev, rng);
        }
        for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
            for (const auto& ex : examples) {
                std::vector<double> g = softmax(matvec_transposed(w, ex.embedding)).values();
                g[static_cast<std::size_t>(ex.target_block)] -= 1.0;
                // dL/dW = e g^T
                add_outer(w, ex.embedding, g, -options.learning_rate);
            }
        }
        if (all_correct(w)) {
            require_finite(w, "gate weights");
            gate.weights = std::move(w);
            return;
        }
    }
    throw TrainingError("train_gate: failed to reach full training accuracy after " +
                        std::to_string(options.max_retries) + " attempts");
}

std::vector<GateExample> make_gate_examples(const RoleRegistry& registry,
                                            std::size_t perturbations,
                                            double dropout, std::uint64_t seed) {
    std::vector<GateExample> out;
    for (std::size_t i = 0; i < registry.roles.size(); ++i) {
        const RoleRecord& record = registry.roles[i];
        if (record.activation.kind != Activation::Kind::block) continue;
        GateExample base;
        base.embedding.assign(registry.embeddings.row(i).begin(),
                              registry.embeddings.row(i).end());
        base.target_block = record.activation.block;
        out.push_back(std::move(base));

        const std::vector<std::string> tokens = embed_tokenize(record.profile.profile_text);
        for (std::size_t j = 0; j < perturbations; ++j) {
            RandomStream rng(derive_seed(seed, "gate-dropout", i * 1000 + j));
            std::vector<std::string> kept;
            for (const auto& tok : tokens)
                if (!rng.bernoulli(dropout)) kept.push_back(tok);
            if (kept.empty()) kept = tokens;
            GateExample ex;
            ex.embedding = embed_tokens(kept, registry.d_embed, registry.embed_seed);
            ex.target_block = record.activation.block;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

}  // namespace rolecast
