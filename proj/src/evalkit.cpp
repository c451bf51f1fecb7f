// SPDX-License-Identifier: Apache-2.0

#include "rolecast/evalkit.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

double perplexity(const ModelState& model, const AdapterSet* adapters,
                  const Activation& act, const std::vector<TokenSequence>& heldout) {
    return std::exp(mean_corpus_loss(model, heldout, adapters, act));
}

PerplexityGrid perplexity_grid(const ModelState& model, const AdapterSet& adapters,
                               const std::vector<RoleDataset>& datasets) {
    if (datasets.empty()) throw InvalidArgument("perplexity_grid: no datasets");
    PerplexityGrid grid;
    grid.values = Matrix(datasets.size(), adapters.layout.capacity);
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        grid.roles.push_back(datasets[i].heldout.role);
        grid.base.push_back(
            perplexity(model, nullptr, Activation::none(), datasets[i].heldout.sequences));
        for (std::size_t k = 0; k < adapters.layout.capacity; ++k)
            grid.values.at(i, k) =
                perplexity(model, &adapters, Activation::for_block(static_cast<int>(k)),
                           datasets[i].heldout.sequences);
    }
    return grid;
}

double gating_accuracy(const RoleRegistry& registry, const GateState& gate,
                       std::span<const LabeledPrompt> prompts) {
    if (prompts.empty()) throw InvalidArgument("gating_accuracy: no prompts");
    std::size_t correct = 0;
    for (const auto& prompt : prompts) {
        const RouteResult r = route(registry, gate, prompt.text);
        if (r.role_index == prompt.expected_role) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(prompts.size());
}

std::vector<LabeledPrompt> make_gating_prompts(const RoleRegistry& registry,
                                               const std::vector<CharacterSpec>& characters,
                                               std::size_t paraphrases_per_role,
                                               std::uint64_t seed) {
    std::vector<LabeledPrompt> prompts;
    for (std::size_t i = 0; i < registry.roles.size(); ++i) {
        const RoleRecord& record = registry.roles[i];
        if (record.activation.kind != Activation::Kind::block) continue;

        LabeledPrompt canonical;
        canonical.text = record.profile.canonical_prompt;
        canonical.expected_role = static_cast<int>(i);
        canonical.canonical = true;
        prompts.push_back(std::move(canonical));

        const CharacterSpec* spec = nullptr;
        for (const auto& c : characters)
            if (c.name == record.profile.name) spec = &c;
        if (!spec) continue;

        RandomStream rng(derive_seed(seed, "paraphrase", i));
        auto pick_token = [&] {
            return spec->exclusive_tokens[rng.uniform_index(spec->exclusive_tokens.size())];
        };
        auto pick_phrase = [&] {
            const auto& phrase =
                spec->signature_phrases[rng.uniform_index(spec->signature_phrases.size())];
            std::string out;
            for (std::size_t t = 0; t < phrase.size(); ++t) {
                if (t) out.push_back(' ');
                out += phrase[t];
            }
            return out;
        };
        const std::string& name = spec->name;
        const std::vector<std::string> templates = {
            "please pretend to be " + name + " for the next answers",
            "roleplay as " + name + " who often says " + pick_phrase(),
            "speak in the voice of " + name + " using words like " + pick_token() + " " +
                pick_token(),
            "be " + name + " now and keep saying " + pick_token(),
            "answer as " + name + " would with " + pick_phrase(),
            name + " should reply here using " + pick_token(),
            "switch to " + name + " and mention " + pick_token(),
        };
        for (std::size_t j = 0; j < paraphrases_per_role; ++j) {
            LabeledPrompt p;
            p.text = templates[j % templates.size()];
            p.expected_role = static_cast<int>(i);
            prompts.push_back(std::move(p));
        }
    }
    return prompts;
}

std::vector<ForgettingDelta> forgetting_report(const PerplexityGrid& before,
                                               const PerplexityGrid& after) {
    if (before.roles != after.roles)
        throw InvalidArgument("forgetting_report: grids cover different roles");
    const std::size_t diag =
        std::min(before.values.cols, after.values.cols);  // shared block prefix
    if (before.roles.size() > diag)
        throw InvalidArgument("forgetting_report: grid lacks a diagonal for every role");
    std::vector<ForgettingDelta> deltas;
    for (std::size_t i = 0; i < before.roles.size(); ++i) {
        ForgettingDelta d;
        d.role = before.roles[i];
        d.before = before.values.at(i, i);
        d.after = after.values.at(i, i);
        d.relative = (d.after - d.before) / d.before;
        deltas.push_back(std::move(d));
    }
    return deltas;
}

TransferStability transfer_stability(
    std::span<const TranscriptRow> transcript,
    const std::map<std::string, std::set<std::string>>& style_lexicon) {
    if (transcript.empty()) throw InvalidArgument("transfer_stability: empty transcript");
    for (const auto& row : transcript)
        if (!row.expected_role)
            throw InvalidArgument("transfer_stability: turn " +
                                  std::to_string(row.turn_index) +
                                  " is missing an expected role");

    std::size_t switch_total = 0, switch_ok = 0;
    std::size_t hold_total = 0, hold_ok = 0;
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        const auto& row = transcript[i];
        const bool is_switch =
            i == 0 || *row.expected_role != *transcript[i - 1].expected_role;
        if (is_switch) {
            ++switch_total;
            if (row.routing.role_name == *row.expected_role) ++switch_ok;
            continue;
        }
        ++hold_total;
        if (row.routing.role_name != *row.expected_role) continue;
        auto it = style_lexicon.find(*row.expected_role);
        if (it == style_lexicon.end()) continue;
        bool style_present = false;
        std::istringstream words(row.agent_text);
        std::string word;
        while (words >> word)
            if (it->second.count(word)) {
                style_present = true;
                break;
            }
        if (style_present) ++hold_ok;
    }

    TransferStability out;
    if (switch_total > 0)
        out.transfer = static_cast<double>(switch_ok) / static_cast<double>(switch_total);
    if (hold_total > 0)
        out.stability = static_cast<double>(hold_ok) / static_cast<double>(hold_total);
    return out;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["notes"] = report.notes;
    j["seed"] = report.seed;
    j["config_digest"] = report.config_digest;
    if (!report.grid.roles.empty()) {
        nlohmann::json grid;
        grid["roles"] = report.grid.roles;
        grid["base_perplexity"] = report.grid.base;
        auto& rows = grid["perplexity"] = nlohmann::json::array();
        for (std::size_t i = 0; i < report.grid.values.rows; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < report.grid.values.cols; ++k)
                row.push_back(report.grid.values.at(i, k));
            rows.push_back(row);
        }
        j["grid"] = grid;
    }
    if (report.gating_accuracy_canonical >= 0.0)
        j["gating_accuracy_canonical"] = report.gating_accuracy_canonical;
    if (report.gating_accuracy_all >= 0.0)
        j["gating_accuracy_all"] = report.gating_accuracy_all;
    auto deltas_json = [](const std::vector<ForgettingDelta>& deltas) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& d : deltas)
            arr.push_back({{"role", d.role},
                           {"before", d.before},
                           {"after", d.after},
                           {"relative", d.relative}});
        return arr;
    };
    if (!report.partitioned_forgetting.empty())
        j["partitioned_forgetting"] = deltas_json(report.partitioned_forgetting);
    if (!report.baseline_forgetting.empty())
        j["baseline_forgetting"] = deltas_json(report.baseline_forgetting);
    if (report.transfer_score >= 0.0) j["transfer_score"] = report.transfer_score;
    if (report.stability_score >= 0.0) j["stability_score"] = report.stability_score;
    return j.dump(2);
}

std::string grid_to_csv(const PerplexityGrid& grid) {
    std::ostringstream out;
    out << "role";
    for (std::size_t k = 0; k < grid.values.cols; ++k) out << ",block_" << k;
    out << ",base\n";
    out.precision(17);
    for (std::size_t i = 0; i < grid.roles.size(); ++i) {
        out << grid.roles[i];
        for (std::size_t k = 0; k < grid.values.cols; ++k) out << ',' << grid.values.at(i, k);
        out << ',' << grid.base[i] << '\n';
    }
    return out.str();
}

}  // namespace rolecast
