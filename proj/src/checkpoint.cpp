// SPDX-License-Identifier: Apache-2.0

#include "rolecast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "rolecast/config.hpp"
#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace rolecast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct NamedMatrix {
    std::string name;
    const Matrix* matrix;
};

std::vector<NamedMatrix> matrix_inventory(const AgentState& state) {
    return {
        {"backbone.embedding", &state.model.embedding},
        {"backbone.hidden", &state.model.hidden},
        {"backbone.output", &state.model.output},
        {"lora.hidden.b", &state.adapters.hidden.b},
        {"lora.hidden.a", &state.adapters.hidden.a},
        {"lora.output.b", &state.adapters.output.b},
        {"lora.output.a", &state.adapters.output.a},
        {"gate.weights", &state.gate.weights},
        {"registry.embeddings", &state.registry.embeddings},
    };
}

void write_matrix_file(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw IoError("checkpoint: short write to " + path.string());
}

Matrix read_matrix_file(const fs::path& path, std::size_t rows, std::size_t cols,
                        const std::string& name, const std::string& expected_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: missing matrix file " + path.string());
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != m.size() * sizeof(double))
        throw IoError("checkpoint: matrix " + name + " is truncated");
    char extra;
    if (in.read(&extra, 1))
        throw IoError("checkpoint: matrix " + name + " has trailing bytes");
    if (digest_hex(matrix_digest(m)) != expected_digest)
        throw IoError("checkpoint: digest mismatch for matrix " + name);
    return m;
}

json activation_to_json(const Activation& act) {
    switch (act.kind) {
        case Activation::Kind::block:
            return {{"type", "block"}, {"block", act.block}};
        case Activation::Kind::fusion:
            return {{"type", "fusion"}, {"weights", act.weights}};
        case Activation::Kind::none:
            return {{"type", "none"}};
    }
    return {};
}

Activation activation_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "block") return Activation::for_block(j.at("block").get<int>());
    if (type == "fusion")
        return Activation::fuse(ProbVector::from_raw(j.at("weights").get<std::vector<double>>()));
    throw IoError("checkpoint: role record with unusable activation type '" + type + "'");
}

}  // namespace

ManifestSummary save_checkpoint(const AgentState& state, const std::string& dir) {
    const fs::path target(dir);
    std::error_code ec;
    if (fs::exists(target, ec))
        throw IoError("checkpoint: target directory already exists: " + dir);

    const fs::path temp = target.string() + ".tmp";
    fs::remove_all(temp, ec);
    if (!fs::create_directories(temp, ec) || ec)
        throw IoError("checkpoint: cannot create " + temp.string());

    json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["config"] = json::parse(config_to_json_text(state.config));
    manifest["vocab"] = state.model.vocab.tokens;
    manifest["context_window"] = state.model.context_window;
    manifest["d_model"] = state.model.d_model;
    manifest["layout"] = {{"capacity", state.adapters.layout.capacity},
                          {"partial_rank", state.adapters.layout.partial_rank},
                          {"alpha", state.adapters.layout.alpha},
                          {"total_rank", state.adapters.layout.total_rank()}};
    manifest["mode"] = state.adapters.mode == AdapterMode::partitioned
                           ? "partitioned"
                           : "shared_baseline";
    manifest["trained_blocks"] =
        std::vector<int>(state.adapters.trained_blocks.begin(),
                         state.adapters.trained_blocks.end());
    manifest["d_embed"] = state.registry.d_embed;
    manifest["embed_seed"] = state.registry.embed_seed;

    auto& roles = manifest["roles"] = json::array();
    for (const auto& record : state.registry.roles) {
        roles.push_back({{"name", record.profile.name},
                         {"profile", record.profile.profile_text},
                         {"canonical_prompt", record.profile.canonical_prompt},
                         {"activation", activation_to_json(record.activation)}});
    }

    auto& matrices = manifest["matrices"] = json::array();
    for (const auto& [name, matrix] : matrix_inventory(state)) {
        const std::string file = name + ".bin";
        write_matrix_file(temp / file, *matrix);
        matrices.push_back({{"name", name},
                            {"rows", matrix->rows},
                            {"cols", matrix->cols},
                            {"file", file},
                            {"digest", digest_hex(matrix_digest(*matrix))}});
    }

    {
        std::ofstream out(temp / "manifest.json");
        if (!out) throw IoError("checkpoint: cannot write manifest");
        out << manifest.dump(2) << '\n';
    }

    fs::rename(temp, target, ec);
    if (ec) {
        fs::remove_all(temp);
        throw IoError("checkpoint: cannot move checkpoint into place at " + dir + ": " +
                      ec.message());
    }

    ManifestSummary summary;
    summary.directory = dir;
    summary.matrices = matrices.size();
    summary.roles = state.registry.roles.size();
    return summary;
}

AgentState load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("checkpoint: missing manifest at " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("checkpoint: unreadable manifest: " + std::string(e.what()));
    }

    try {
        const int version = manifest.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion)
            throw IoError("checkpoint: unsupported format version " +
                          std::to_string(version));

        AgentState state;
        state.config = config_from_json_text(manifest.at("config").dump());

        const auto tokens = manifest.at("vocab").get<std::vector<std::string>>();
        if (tokens.size() < 4 || tokens[0] != "<bos>" || tokens[1] != "<eos>" ||
            tokens[2] != "<unk>")
            throw IoError("checkpoint: malformed vocabulary");
        state.model.vocab = Vocabulary::build(
            std::span<const std::string>(tokens.data() + 3, tokens.size() - 3));
        state.model.context_window = manifest.at("context_window").get<std::size_t>();
        state.model.d_model = manifest.at("d_model").get<std::size_t>();

        const auto& layout = manifest.at("layout");
        state.adapters.layout = BlockLayout::with_total_rank(
            layout.at("capacity").get<std::size_t>(),
            layout.at("partial_rank").get<std::size_t>(),
            layout.at("alpha").get<double>(), layout.at("total_rank").get<std::size_t>());
        state.adapters.mode = manifest.at("mode").get<std::string>() == "partitioned"
                                  ? AdapterMode::partitioned
                                  : AdapterMode::shared_baseline;
        for (int block : manifest.at("trained_blocks").get<std::vector<int>>())
            state.adapters.trained_blocks.insert(block);

        state.registry =
            RoleRegistry::create(manifest.at("d_embed").get<std::size_t>(),
                                 manifest.at("embed_seed").get<std::uint64_t>());

        std::map<std::string, Matrix> loaded;
        for (const auto& entry : manifest.at("matrices")) {
            const std::string name = entry.at("name").get<std::string>();
            loaded[name] = read_matrix_file(root / entry.at("file").get<std::string>(),
                                            entry.at("rows").get<std::size_t>(),
                                            entry.at("cols").get<std::size_t>(), name,
                                            entry.at("digest").get<std::string>());
        }
        auto take = [&](const char* name) {
            auto it = loaded.find(name);
            if (it == loaded.end())
                throw IoError(std::string("checkpoint: manifest lacks matrix ") + name);
            return std::move(it->second);
        };
        state.model.embedding = take("backbone.embedding");
        state.model.hidden = take("backbone.hidden");
        state.model.output = take("backbone.output");
        state.model.frozen = true;
        state.adapters.hidden.b = take("lora.hidden.b");
        state.adapters.hidden.a = take("lora.hidden.a");
        state.adapters.output.b = take("lora.output.b");
        state.adapters.output.a = take("lora.output.a");
        state.gate.weights = take("gate.weights");
        Matrix embeddings = take("registry.embeddings");

        // Role records are rebuilt through register_role so every registry
        // invariant is revalidated, then the stored embedding matrix must
        // match the recomputed one bit for bit.
        for (const auto& role : manifest.at("roles")) {
            RoleProfile profile;
            profile.name = role.at("name").get<std::string>();
            profile.profile_text = role.at("profile").get<std::string>();
            profile.canonical_prompt = role.at("canonical_prompt").get<std::string>();
            register_role(state.registry, state.gate, profile,
                          activation_from_json(role.at("activation")));
        }
        if (!bit_identical(state.registry.embeddings, embeddings))
            throw IoError("checkpoint: stored role embeddings do not match profiles");

        // Shape cross-checks against the layout and model dims.
        const std::size_t r = state.adapters.layout.total_rank();
        if (state.adapters.hidden.b.cols != r || state.adapters.hidden.a.rows != r ||
            state.adapters.output.b.cols != r || state.adapters.output.a.rows != r)
            throw IoError("checkpoint: adapter shapes disagree with the layout");
        if (state.gate.weights.cols != state.adapters.layout.capacity)
            throw IoError("checkpoint: gate columns disagree with the layout");
        return state;
    } catch (const json::exception& e) {
        throw IoError("checkpoint: malformed manifest: " + std::string(e.what()));
    }
}

std::uint64_t state_digest(const AgentState& state) {
    std::uint64_t h = 0x452821e638d01377ull;
    std::uint64_t salt = 0;
    for (const auto& [name, matrix] : matrix_inventory(state))
        h ^= mix64(matrix_digest(*matrix) + ++salt);
    return h;
}

}  // namespace rolecast
