// SPDX-License-Identifier: Apache-2.0
//
// Synthetic persona construction and dataset ingestion. Characters are
// deterministic generators over a shared vocabulary: each one owns four
// exclusive tokens, signature phrases built from them, and a peaked
// unigram distribution, so character fidelity is a measurable
// distributional property.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rolecast/backbone.hpp"

namespace rolecast {

// Content token ids start right after the specials. The content pool is
// 64 words: indices 0..27 common, 28..31 reserved for the incremental
// character, 32+4*(n-1)..+4 exclusive to pre-tuning character n.
constexpr std::size_t kContentTokens = 64;
constexpr std::size_t kCommonTokens = 28;
constexpr std::size_t kReservedTokens = 4;
constexpr std::size_t kExclusivePerCharacter = 4;
constexpr std::size_t kMaxPretrainCharacters = 8;
constexpr std::size_t kIncrementalCharacterNumber = 9;

struct CharacterSpec {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::string>> signature_phrases;
    std::vector<std::vector<int>> signature_phrase_ids;
    std::vector<std::string> exclusive_tokens;
    std::string profile_text;
    // Categorical over content tokens, aligned with bias_token_ids.
    std::vector<int> bias_token_ids;
    std::vector<double> unigram_bias;
};

enum class Split { train, heldout };

struct RoleCorpus {
    std::string role;
    std::vector<TokenSequence> sequences;
    Split split = Split::train;
};

struct RoleDataset {
    RoleCorpus train;
    RoleCorpus heldout;
};

// The shared 64-word content vocabulary plus speaker tags, all generated
// from the seed. Tags come last so content ids stay contiguous.
Vocabulary build_synthetic_vocabulary(std::uint64_t seed);
// Common-pool words, usable as role-free filler text.
std::vector<std::string> common_pool_words(const Vocabulary& vocab);

// number is the 1-based character number; 1..8 pre-tuning, 9 incremental.
CharacterSpec make_character(std::size_t number, std::uint64_t master_seed,
                             const Vocabulary& vocab);

struct CorpusOptions {
    std::size_t n_sequences = 300;
    std::size_t length = 12;
    double phrase_insertion_rate = 0.2;
};

// Draws sequences from the character's unigram bias with signature-phrase
// insertions; sequence index i % 10 == 9 goes to the heldout split.
RoleDataset sample_corpus(const CharacterSpec& spec, const CorpusOptions& options,
                          std::uint64_t seed);

// JSONL of {"role": str, "turns": [{"speaker": "user"|"agent", "text": str}]}.
// Agent-speaker texts become training sequences for that role.
std::map<std::string, RoleCorpus> load_dialogues(const std::string& path,
                                                 const Vocabulary& vocab);

// Corpus dump format: JSONL of {"role": str, "tokens": [str], "split": str}.
std::map<std::string, RoleDataset> load_corpus_dump(const std::string& path,
                                                    const Vocabulary& vocab);
void save_corpus_dump(const std::string& path,
                      const std::map<std::string, RoleDataset>& datasets,
                      const Vocabulary& vocab);

}  // namespace rolecast
