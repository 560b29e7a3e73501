#pragma once

#include "psd/corpus.hpp"
#include "psd/denoiser.hpp"
#include "psd/engine.hpp"
#include "psd/frontier_oracle.hpp"
#include "psd/hashing.hpp"

#include <string>
#include <vector>

namespace psd::test {

inline Vocabulary synthetic_vocab(TokenId size) {
    return Vocabulary(size, size - 1);  // eos is the last real token
}

inline DenoiserOutput make_output(std::vector<Prediction> preds) {
    DenoiserOutput out;
    out.predictions = std::move(preds);
    return out;
}

/// Seeded uniform reference over real non-eos tokens with the eos placed at
/// `eos_at` (absolute position; pass a position beyond the array for none).
inline std::vector<TokenId> make_reference(const Vocabulary & vocab, Position length,
                                           Position eos_at, uint64_t seed) {
    std::vector<TokenId> ref(static_cast<size_t>(length));
    for (Position i = 0; i < length; ++i) {
        if (i == eos_at) {
            ref[static_cast<size_t>(i)] = vocab.eos_id;
            continue;
        }
        const uint64_t h = hash_words({seed, 0x7265666bull, static_cast<uint64_t>(i)});
        ref[static_cast<size_t>(i)] =
            static_cast<TokenId>(h % static_cast<uint64_t>(vocab.size - 1));
    }
    return ref;
}

inline std::vector<TokenId> reference_prompt(const std::vector<TokenId> & reference,
                                             Position prompt_len) {
    return {reference.begin(), reference.begin() + prompt_len};
}

/// Small fixed corpus for count-model suites.
inline std::vector<std::string> tiny_corpus_lines() {
    return {
        "the quick brown fox jumps over the lazy dog",
        "pack my box with five dozen liquor jugs",
        "how vexingly quick daft zebras jump",
        "the five boxing wizards jump quickly",
        "sphinx of black quartz judge my vow",
        "the lazy dog naps while the quick fox runs",
        "bright vixens jump dozy fowl quack",
        "jaded zombies acted quaintly but kept driving oxen forward",
        "my girl wove six dozen plaid jackets before she quit",
        "a quick movement of the enemy will jeopardize six gunboats",
    };
}

}  // namespace psd::test
