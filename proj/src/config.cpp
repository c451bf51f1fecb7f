// SPDX-License-Identifier: Apache-2.0

#include "rolecast/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

std::uint64_t Config::seed_for(const std::string& tag) const {
    auto it = seed_overrides.find(tag);
    if (it != seed_overrides.end()) return it->second;
    return derive_seed(master_seed, tag);
}

void Config::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw InvalidArgument(std::string("config: ") + name + " must be positive");
    };
    auto at_least_one = [](std::size_t v, const char* name) {
        if (v < 1) throw InvalidArgument(std::string("config: ") + name + " must be >= 1");
    };
    at_least_one(num_roles, "num_roles");
    at_least_one(partial_rank, "partial_rank");
    at_least_one(baseline_rank, "baseline_rank");
    at_least_one(d_model, "d_model");
    at_least_one(context_window, "context_window");
    at_least_one(epochs, "epochs");
    at_least_one(backbone_epochs, "backbone_epochs");
    at_least_one(gate_epochs, "gate_epochs");
    at_least_one(sequence_length, "sequence_length");
    at_least_one(max_tokens, "max_tokens");
    at_least_one(transfer_rounds, "transfer_rounds");
    if (d_embed < 2) throw InvalidArgument("config: d_embed must be >= 2");
    positive(learning_rate, "learning_rate");
    positive(backbone_learning_rate, "backbone_learning_rate");
    positive(gate_learning_rate, "gate_learning_rate");
    positive(lora_init_stddev, "lora_init_stddev");
    if (alpha < 0.0) throw InvalidArgument("config: alpha must be positive when set");
    if (gate_max_retries < 1) throw InvalidArgument("config: gate_max_retries must be >= 1");
    if (switch_threshold < 0.0 || switch_threshold > 1.0)
        throw InvalidArgument("config: switch_threshold must lie in [0, 1]");
    if (gate_dropout < 0.0 || gate_dropout >= 1.0)
        throw InvalidArgument("config: gate_dropout must lie in [0, 1)");
    if (phrase_insertion_rate < 0.0 || phrase_insertion_rate > 1.0)
        throw InvalidArgument("config: phrase_insertion_rate must lie in [0, 1]");
    if (sequences_per_role < 10)
        throw InvalidArgument("config: sequences_per_role must be >= 10");
}

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "master_seed", "seed_overrides", "num_roles", "partial_rank", "alpha",
        "baseline_rank", "d_model", "context_window", "d_embed", "learning_rate",
        "epochs", "backbone_learning_rate", "backbone_epochs", "embedding_init_stddev",
        "hidden_init_stddev", "lora_init_stddev", "gate_learning_rate", "gate_epochs",
        "gate_max_retries", "gate_perturbations", "gate_dropout", "switch_threshold",
        "sequences_per_role", "sequence_length", "phrase_insertion_rate", "max_tokens",
        "transfer_scripts", "transfer_rounds"};
    return keys;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Config config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known_keys().count(key))
            throw InvalidArgument("config: unknown key '" + key + "'");
    }
    if (j.contains("total_rank"))
        throw InvalidArgument("config: total rank is derived, not configurable");

    Config c;
    try {
        read(j, "master_seed", c.master_seed);
        if (j.contains("seed_overrides")) {
            for (const auto& [key, value] : j.at("seed_overrides").items())
                c.seed_overrides[key] = value.get<std::uint64_t>();
        }
        read(j, "num_roles", c.num_roles);
        read(j, "partial_rank", c.partial_rank);
        read(j, "alpha", c.alpha);
        read(j, "baseline_rank", c.baseline_rank);
        read(j, "d_model", c.d_model);
        read(j, "context_window", c.context_window);
        read(j, "d_embed", c.d_embed);
        read(j, "learning_rate", c.learning_rate);
        read(j, "epochs", c.epochs);
        read(j, "backbone_learning_rate", c.backbone_learning_rate);
        read(j, "backbone_epochs", c.backbone_epochs);
        read(j, "embedding_init_stddev", c.embedding_init_stddev);
        read(j, "hidden_init_stddev", c.hidden_init_stddev);
        read(j, "lora_init_stddev", c.lora_init_stddev);
        read(j, "gate_learning_rate", c.gate_learning_rate);
        read(j, "gate_epochs", c.gate_epochs);
        read(j, "gate_max_retries", c.gate_max_retries);
        read(j, "gate_perturbations", c.gate_perturbations);
        read(j, "gate_dropout", c.gate_dropout);
        read(j, "switch_threshold", c.switch_threshold);
        read(j, "sequences_per_role", c.sequences_per_role);
        read(j, "sequence_length", c.sequence_length);
        read(j, "phrase_insertion_rate", c.phrase_insertion_rate);
        read(j, "max_tokens", c.max_tokens);
        read(j, "transfer_scripts", c.transfer_scripts);
        read(j, "transfer_rounds", c.transfer_rounds);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

std::string config_to_json_text(const Config& c) {
    json j;
    j["master_seed"] = c.master_seed;
    if (!c.seed_overrides.empty()) {
        json overrides = json::object();
        for (const auto& [key, value] : c.seed_overrides) overrides[key] = value;
        j["seed_overrides"] = overrides;
    }
    j["num_roles"] = c.num_roles;
    j["partial_rank"] = c.partial_rank;
    j["alpha"] = c.alpha;
    j["baseline_rank"] = c.baseline_rank;
    j["d_model"] = c.d_model;
    j["context_window"] = c.context_window;
    j["d_embed"] = c.d_embed;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["backbone_learning_rate"] = c.backbone_learning_rate;
    j["backbone_epochs"] = c.backbone_epochs;
    j["embedding_init_stddev"] = c.embedding_init_stddev;
    j["hidden_init_stddev"] = c.hidden_init_stddev;
    j["lora_init_stddev"] = c.lora_init_stddev;
    j["gate_learning_rate"] = c.gate_learning_rate;
    j["gate_epochs"] = c.gate_epochs;
    j["gate_max_retries"] = c.gate_max_retries;
    j["gate_perturbations"] = c.gate_perturbations;
    j["gate_dropout"] = c.gate_dropout;
    j["switch_threshold"] = c.switch_threshold;
    j["sequences_per_role"] = c.sequences_per_role;
    j["sequence_length"] = c.sequence_length;
    j["phrase_insertion_rate"] = c.phrase_insertion_rate;
    j["max_tokens"] = c.max_tokens;
    j["transfer_scripts"] = c.transfer_scripts;
    j["transfer_rounds"] = c.transfer_rounds;
    return j.dump(2);
}

std::uint64_t config_digest(const Config& config) {
    const std::string text = config_to_json_text(config);
    return fnv1a64_bytes(text.data(), text.size());
}

}  // namespace rolecast
