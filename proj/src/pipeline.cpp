// SPDX-License-Identifier: Apache-2.0

#include "rolecast/pipeline.hpp"

#include "rolecast/errors.hpp"
#include "rolecast/lora_train.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

SyntheticWorld build_world(const Config& config) {
    config.validate();
    if (config.num_roles > kMaxPretrainCharacters)
        throw InvalidArgument("build_world: at most " +
                              std::to_string(kMaxPretrainCharacters) +
                              " pre-tuning roles are supported");
    SyntheticWorld world;
    world.vocab = build_synthetic_vocabulary(config.seed_for("vocabulary"));
    world.filler_lexicon = common_pool_words(world.vocab);

    CorpusOptions corpus_options;
    corpus_options.n_sequences = config.sequences_per_role;
    corpus_options.length = config.sequence_length;
    corpus_options.phrase_insertion_rate = config.phrase_insertion_rate;

    const std::uint64_t corpus_seed = config.seed_for("corpus");
    for (std::size_t n = 1; n <= config.num_roles; ++n) {
        world.characters.push_back(make_character(n, config.master_seed, world.vocab));
        world.datasets.push_back(
            sample_corpus(world.characters.back(), corpus_options, corpus_seed));
    }
    world.characters.push_back(
        make_character(kIncrementalCharacterNumber, config.master_seed, world.vocab));
    world.datasets.push_back(
        sample_corpus(world.characters.back(), corpus_options, corpus_seed));
    return world;
}

const CharacterSpec& incremental_character(const SyntheticWorld& world) {
    return world.characters.back();
}

const RoleDataset& incremental_dataset(const SyntheticWorld& world) {
    return world.datasets.back();
}

RoleProfile profile_for(const CharacterSpec& spec) {
    RoleProfile profile;
    profile.name = spec.name;
    profile.profile_text = spec.profile_text;
    profile.canonical_prompt = canonical_prompt_for(spec.name);
    return profile;
}

std::map<std::string, std::set<std::string>> style_lexicon(const SyntheticWorld& world) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& spec : world.characters)
        out[spec.name] = {spec.exclusive_tokens.begin(), spec.exclusive_tokens.end()};
    return out;
}

AgentState pretrain_pipeline(const Config& config, const SyntheticWorld& world) {
    config.validate();
    const std::size_t n_roles = config.num_roles;

    // Mixed-role backbone corpus, round-robin so the base model sees every
    // role evenly.
    std::vector<TokenSequence> mixed;
    std::size_t longest = 0;
    for (std::size_t k = 0; k < n_roles; ++k)
        longest = std::max(longest, world.datasets[k].train.sequences.size());
    for (std::size_t i = 0; i < longest; ++i)
        for (std::size_t k = 0; k < n_roles; ++k)
            if (i < world.datasets[k].train.sequences.size())
                mixed.push_back(world.datasets[k].train.sequences[i]);

    PretrainOptions backbone_options;
    backbone_options.context_window = config.context_window;
    backbone_options.d_model = config.d_model;
    backbone_options.learning_rate = config.backbone_learning_rate;
    backbone_options.epochs = config.backbone_epochs;
    backbone_options.embedding_init_stddev = config.embedding_init_stddev;
    backbone_options.hidden_init_stddev = config.hidden_init_stddev;
    backbone_options.seed = config.seed_for("backbone");

    AgentState state;
    state.config = config;
    state.model = pretrain_base(mixed, world.vocab, backbone_options);

    state.adapters =
        AdapterSet::init(config.d_model, world.vocab.size(), config.layout(),
                         AdapterMode::partitioned, config.lora_init_stddev,
                         config.seed_for("lora"));
    state.gate.weights = Matrix(config.d_embed, config.num_roles, 0.0);
    state.registry = RoleRegistry::create(config.d_embed, config.seed_for("embedder"));

    TrainOptions lora_options;
    lora_options.learning_rate = config.learning_rate;
    lora_options.epochs = config.epochs;
    for (std::size_t k = 0; k < n_roles; ++k) {
        register_role(state.registry, state.gate, profile_for(world.characters[k]),
                      Activation::for_block(static_cast<int>(k)));
        train_block(state.adapters, state.model, static_cast<int>(k),
                    world.datasets[k].train.sequences, lora_options);
    }

    GateTrainOptions gate_options;
    gate_options.learning_rate = config.gate_learning_rate;
    gate_options.epochs = config.gate_epochs;
    gate_options.max_retries = config.gate_max_retries;
    gate_options.seed = config.seed_for("gate");
    train_gate(state.gate,
               make_gate_examples(state.registry, config.gate_perturbations,
                                  config.gate_dropout, config.seed_for("gate-data")),
               gate_options);
    return state;
}

AgentState pretrain_pipeline(const Config& config) {
    return pretrain_pipeline(config, build_world(config));
}

AdapterSet make_baseline_adapters(const Config& config, const ModelState& model) {
    return AdapterSet::init(config.d_model, model.vocab.size(),
                            config.baseline_layout(), AdapterMode::shared_baseline,
                            config.lora_init_stddev, config.seed_for("baseline-lora"));
}

EvalSelection EvalSelection::all() {
    EvalSelection s;
    s.grid = s.gating = s.transfer = s.forgetting = true;
    return s;
}

EvalReport run_eval(const AgentState& state, const SyntheticWorld& world,
                    const EvalSelection& selection) {
    EvalReport report;
    report.notes =
        "Offline proxies: style presence and heldout perplexity stand in for "
        "judged character behavior/utterance quality; knowledge and topical "
        "relevance dimensions have no offline analogue here and are not scored.";
    report.seed = state.config.master_seed;
    report.config_digest = digest_hex(config_digest(state.config));

    const std::size_t n_roles = state.config.num_roles;
    std::vector<RoleDataset> pretuned(world.datasets.begin(),
                                      world.datasets.begin() +
                                          static_cast<std::ptrdiff_t>(n_roles));

    if (selection.grid)
        report.grid = perplexity_grid(state.model, state.adapters, pretuned);

    if (selection.gating) {
        const auto prompts = make_gating_prompts(
            state.registry, world.characters, state.config.gate_perturbations,
            state.config.seed_for("paraphrases"));
        std::vector<LabeledPrompt> canonical;
        for (const auto& p : prompts)
            if (p.canonical) canonical.push_back(p);
        report.gating_accuracy_canonical =
            gating_accuracy(state.registry, state.gate, canonical);
        report.gating_accuracy_all = gating_accuracy(state.registry, state.gate, prompts);
    }

    if (selection.transfer) {
        const auto scripts = generate_transfer_scripts(
            state.registry, world.filler_lexicon, state.config.transfer_scripts,
            state.config.transfer_rounds, state.config.seed_for("transfer"));
        const auto lexicon = style_lexicon(world);
        double transfer_sum = 0.0, stability_sum = 0.0;
        for (const auto& script : scripts) {
            const auto transcript = run_script(state, script, state.config.max_tokens);
            const TransferStability ts = transfer_stability(transcript, lexicon);
            transfer_sum += ts.transfer;
            stability_sum += ts.stability;
        }
        report.transfer_score = transfer_sum / static_cast<double>(scripts.size());
        report.stability_score = stability_sum / static_cast<double>(scripts.size());
    }

    if (selection.forgetting) {
        // Partitioned deltas: role-0 diagonal before and after re-training
        // another block (block 1) — structurally zero.
        AgentState probe = state;
        TrainOptions lora_options;
        lora_options.learning_rate = state.config.learning_rate;
        lora_options.epochs = 2;
        const PerplexityGrid before = perplexity_grid(probe.model, probe.adapters, pretuned);
        if (n_roles > 1)
            train_block(probe.adapters, probe.model, 1, world.datasets[1].train.sequences,
                        lora_options);
        const PerplexityGrid after = perplexity_grid(probe.model, probe.adapters, pretuned);
        report.partitioned_forgetting = forgetting_report(before, after);

        // Shared-baseline comparator: sequential fine-tuning on the first
        // two roles, diagonal measured for role 0.
        if (n_roles > 1) {
            TrainOptions baseline_options;
            baseline_options.learning_rate = state.config.learning_rate;
            baseline_options.epochs = state.config.epochs;
            AdapterSet baseline = make_baseline_adapters(state.config, state.model);
            std::vector<RoleDataset> first_role(world.datasets.begin(),
                                                world.datasets.begin() + 1);
            train_shared_baseline(baseline, state.model,
                                  {world.datasets[0].train.sequences}, baseline_options);
            const PerplexityGrid base_before =
                perplexity_grid(state.model, baseline, first_role);
            train_shared_baseline(baseline, state.model,
                                  {world.datasets[1].train.sequences}, baseline_options);
            const PerplexityGrid base_after =
                perplexity_grid(state.model, baseline, first_role);
            report.baseline_forgetting = forgetting_report(base_before, base_after);
        }
    }
    return report;
}

}  // namespace rolecast
