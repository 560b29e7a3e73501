#pragma once

#include "psd/vocabulary.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace psd {

enum class Tokenization {
    char_level,   // one token per Unicode code point
    whitespace,   // whitespace-delimited words, runs collapsed
};

Tokenization parse_tokenization(const std::string & s);
const char * to_string(Tokenization t);

struct CorpusOptions {
    Tokenization tokenization = Tokenization::char_level;
    int64_t min_count = 1;  // tokens below this map to a reserved <unk>
};

struct Corpus {
    std::vector<std::vector<TokenId>> documents;
    Vocabulary vocab;
    std::optional<TokenId> unk_id;  // present when min_count > 1
    std::vector<int64_t> token_counts;  // corpus frequency per id
    std::string source;
    CorpusOptions options;

    std::vector<TokenId> encode(const std::string & text) const;
    std::string decode(const std::vector<TokenId> & tokens) const;
};

/// Deterministic vocabulary over the given texts: ids by (frequency desc,
/// text asc), reserved <unk> appended when min_count > 1, reserved <eos>
/// appended last, mask_id one past the end.
Corpus build_corpus(const std::vector<std::string> & texts, const CorpusOptions & options,
                    const std::string & source = "<memory>");

/// UTF-8 text, one document per line; blank lines are skipped.
Corpus load_corpus_file(const std::string & path, const CorpusOptions & options);

void save_vocab(const Corpus & corpus, const std::string & path);

struct EvalPair {
    std::vector<TokenId> prompt;
    std::vector<TokenId> reference;  // the full document, prompt included
};

/// Seeded deterministic sampling of prompt/reference pairs from documents
/// long enough to continue past the prompt.
std::vector<EvalPair> make_eval_suite(const Corpus & corpus, int32_t n_prompts,
                                      Position prompt_len, uint64_t seed);

}  // namespace psd
