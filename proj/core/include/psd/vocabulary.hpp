#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace psd {

using TokenId  = int32_t;
using Position = int32_t;

/// Token id space: real tokens are [0, size); the mask sentinel sits one past
/// the last real token and is never generable. eos is a real token.
struct Vocabulary {
    TokenId size   = 0;
    TokenId mask_id = 0;
    TokenId eos_id  = 0;
    std::vector<std::string> token_text;  // optional; empty or size entries

    Vocabulary() = default;
    Vocabulary(TokenId size_, TokenId eos_id_, std::vector<std::string> text = {})
        : size(size_), mask_id(size_), eos_id(eos_id_), token_text(std::move(text)) {
        validate();
    }

    void validate() const {
        if (size < 2) {
            throw std::invalid_argument("vocabulary: size must be >= 2");
        }
        if (eos_id < 0 || eos_id >= size) {
            throw std::invalid_argument("vocabulary: eos_id must name a real token");
        }
        if (mask_id != size) {
            throw std::invalid_argument("vocabulary: mask_id must be one past the last real token");
        }
        if (!token_text.empty() && token_text.size() != static_cast<size_t>(size)) {
            throw std::invalid_argument("vocabulary: token_text must be empty or cover all real tokens");
        }
    }

    bool is_real(TokenId t) const { return t >= 0 && t < size; }

    std::string text_of(TokenId t) const {
        if (!token_text.empty() && is_real(t)) return token_text[static_cast<size_t>(t)];
        if (t == mask_id) return "<mask>";
        return "#" + std::to_string(t);
    }
};

}  // namespace psd
