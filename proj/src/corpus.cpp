// SPDX-License-Identifier: Apache-2.0

#include "rolecast/corpus.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

namespace {

constexpr std::size_t kContentBase = 3;  // after <bos>, <eos>, <unk>

// Vocabulary words never contain q/x/z; character names always do, so the
// two sets cannot collide.
const char* const kNames[] = {"Zorvath",   "Xylia",  "Quintrell",
                              "Zephyrine", "Axilor", "Quorra",
                              "Zindel",    "Xavric", "Quilliam"};

std::string make_word(RandomStream& rng) {
    static const char* consonants = "bdfghklmnprstvw";
    static const char* vowels = "aeiou";
    const std::size_t syllables = 2 + rng.uniform_index(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(consonants[rng.uniform_index(15)]);
        w.push_back(vowels[rng.uniform_index(5)]);
    }
    return w;
}

}  // namespace

Vocabulary build_synthetic_vocabulary(std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, "vocabulary"));
    std::vector<std::string> words;
    std::set<std::string> used;
    while (words.size() < kContentTokens) {
        std::string w = make_word(rng);
        if (used.insert(w).second) words.push_back(w);
    }
    // Speaker tags used when chat history is flattened into a context.
    words.push_back("user:");
    words.push_back("agent:");
    return Vocabulary::build(words);
}

std::vector<std::string> common_pool_words(const Vocabulary& vocab) {
    if (vocab.size() < kContentBase + kContentTokens)
        throw InvalidArgument("common_pool_words: vocabulary too small");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kCommonTokens; ++i)
        out.push_back(vocab.token(static_cast<int>(kContentBase + i)));
    return out;
}

CharacterSpec make_character(std::size_t number, std::uint64_t master_seed,
                             const Vocabulary& vocab) {
    if (number < 1 || number > kIncrementalCharacterNumber)
        throw InvalidArgument("make_character: character number must be in [1, 9]");
    const std::size_t required = kContentBase + kContentTokens;
    if (vocab.size() < required)
        throw InvalidArgument("make_character: vocabulary too small, need at least " +
                              std::to_string(required) + " tokens");

    CharacterSpec spec;
    spec.name = kNames[number - 1];
    spec.seed = derive_seed(master_seed, "character", number);

    std::size_t exclusive_base;
    if (number <= kMaxPretrainCharacters) {
        exclusive_base = kContentBase + kCommonTokens + kReservedTokens +
                         (number - 1) * kExclusivePerCharacter;
    } else {
        exclusive_base = kContentBase + kCommonTokens;  // the reserved slice
    }
    for (std::size_t i = 0; i < kExclusivePerCharacter; ++i)
        spec.exclusive_tokens.push_back(
            vocab.token(static_cast<int>(exclusive_base + i)));

    const auto& e = spec.exclusive_tokens;
    spec.signature_phrases = {{e[0], e[1]}, {e[2], e[3], e[0]}};
    for (const auto& phrase : spec.signature_phrases) {
        std::vector<int> ids;
        for (const auto& tok : phrase) ids.push_back(vocab.lookup(tok));
        spec.signature_phrase_ids.push_back(std::move(ids));
    }

    // Categorical over all content tokens: a uniform floor plus a strong
    // peak on the character's own exclusives.
    const double floor = 0.4 / static_cast<double>(kContentTokens);
    const double peak = 0.6 / static_cast<double>(kExclusivePerCharacter);
    for (std::size_t i = 0; i < kContentTokens; ++i) {
        spec.bias_token_ids.push_back(static_cast<int>(kContentBase + i));
        double p = floor;
        if (kContentBase + i >= exclusive_base &&
            kContentBase + i < exclusive_base + kExclusivePerCharacter)
            p += peak;
        spec.unigram_bias.push_back(p);
    }

    auto join = [](const std::vector<std::string>& parts) {
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) out.push_back(' ');
            out += parts[i];
        }
        return out;
    };
    // Name-heavy so instruction embeddings retrieve this row decisively.
    spec.profile_text = spec.name + " is " + spec.name + ". " + spec.name +
                        " often says " + join(spec.signature_phrases[0]) + ". " +
                        spec.name + " favors " + join(spec.exclusive_tokens) + ". " +
                        spec.name + " repeats " + join(spec.signature_phrases[1]) +
                        ". " + spec.name + " speaks as " + spec.name + ".";
    return spec;
}

RoleDataset sample_corpus(const CharacterSpec& spec, const CorpusOptions& options,
                          std::uint64_t seed) {
    if (options.n_sequences < 10)
        throw InvalidArgument("sample_corpus: need at least 10 sequences for a heldout split");
    if (options.length < 1) throw InvalidArgument("sample_corpus: length must be >= 1");

    RoleDataset out;
    out.train.role = spec.name;
    out.train.split = Split::train;
    out.heldout.role = spec.name;
    out.heldout.split = Split::heldout;

    for (std::size_t i = 0; i < options.n_sequences; ++i) {
        RandomStream rng(derive_seed(seed ^ spec.seed, "sequence", i));
        TokenSequence seq;
        while (seq.ids.size() < options.length) {
            const std::size_t remaining = options.length - seq.ids.size();
            bool inserted = false;
            if (rng.bernoulli(options.phrase_insertion_rate)) {
                const auto& phrase =
                    spec.signature_phrase_ids[rng.uniform_index(spec.signature_phrase_ids.size())];
                if (phrase.size() <= remaining) {
                    seq.ids.insert(seq.ids.end(), phrase.begin(), phrase.end());
                    inserted = true;
                }
            }
            if (!inserted) {
                const std::size_t idx = rng.categorical(spec.unigram_bias);
                seq.ids.push_back(spec.bias_token_ids[idx]);
            }
        }
        if (i % 10 == 9)
            out.heldout.sequences.push_back(std::move(seq));
        else
            out.train.sequences.push_back(std::move(seq));
    }
    return out;
}

std::map<std::string, RoleCorpus> load_dialogues(const std::string& path,
                                                 const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("load_dialogues: cannot open " + path);
    std::map<std::string, RoleCorpus> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("load_dialogues: line " + std::to_string(line_no) +
                                  ": " + e.what());
        }
        if (!j.contains("role") || !j["role"].is_string() || !j.contains("turns") ||
            !j["turns"].is_array())
            throw InvalidArgument("load_dialogues: line " + std::to_string(line_no) +
                                  ": expected {role, turns}");
        const std::string role = j["role"].get<std::string>();
        auto& corpus = out[role];
        corpus.role = role;
        corpus.split = Split::train;
        for (const auto& turn : j["turns"]) {
            if (!turn.contains("speaker") || !turn["speaker"].is_string() ||
                !turn.contains("text") || !turn["text"].is_string())
                throw InvalidArgument("load_dialogues: line " + std::to_string(line_no) +
                                      ": expected {speaker, text} turns");
            const std::string speaker = turn["speaker"].get<std::string>();
            if (speaker == "agent") {
                TokenSequence seq = tokenize(turn["text"].get<std::string>(), vocab);
                if (!seq.ids.empty()) corpus.sequences.push_back(std::move(seq));
            } else if (speaker != "user") {
                throw InvalidArgument("load_dialogues: line " + std::to_string(line_no) +
                                      ": unknown speaker tag '" + speaker + "'");
            }
        }
    }
    return out;
}

std::map<std::string, RoleDataset> load_corpus_dump(const std::string& path,
                                                    const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("load_corpus_dump: cannot open " + path);
    std::map<std::string, RoleDataset> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("load_corpus_dump: line " + std::to_string(line_no) +
                                  ": " + e.what());
        }
        if (!j.contains("role") || !j.contains("tokens") || !j.contains("split"))
            throw InvalidArgument("load_corpus_dump: line " + std::to_string(line_no) +
                                  ": expected {role, tokens, split}");
        const std::string role = j["role"].get<std::string>();
        const std::string split = j["split"].get<std::string>();
        if (split != "train" && split != "heldout")
            throw InvalidArgument("load_corpus_dump: line " + std::to_string(line_no) +
                                  ": split must be train or heldout");
        TokenSequence seq;
        for (const auto& tok : j["tokens"]) seq.ids.push_back(vocab.lookup(tok.get<std::string>()));
        auto& dataset = out[role];
        dataset.train.role = role;
        dataset.train.split = Split::train;
        dataset.heldout.role = role;
        dataset.heldout.split = Split::heldout;
        if (split == "train")
            dataset.train.sequences.push_back(std::move(seq));
        else
            dataset.heldout.sequences.push_back(std::move(seq));
    }
    return out;
}

void save_corpus_dump(const std::string& path,
                      const std::map<std::string, RoleDataset>& datasets,
                      const Vocabulary& vocab) {
    std::ofstream outf(path);
    if (!outf) throw IoError("save_corpus_dump: cannot open " + path + " for writing");
    auto write = [&](const RoleCorpus& corpus, const char* split) {
        for (const auto& seq : corpus.sequences) {
            nlohmann::json j;
            j["role"] = corpus.role;
            j["split"] = split;
            auto& toks = j["tokens"] = nlohmann::json::array();
            for (int id : seq.ids) toks.push_back(vocab.token(id));
            outf << j.dump() << '\n';
        }
    };
    for (const auto& [role, dataset] : datasets) {
        write(dataset.train, "train");
        write(dataset.heldout, "heldout");
    }
}

}  // namespace rolecast
