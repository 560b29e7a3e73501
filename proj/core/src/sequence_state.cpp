#include "psd/sequence_state.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace psd {

const char * to_string(CommitSource s) {
    switch (s) {
        case CommitSource::spatial:         return "spatial";
        case CommitSource::speculative:     return "speculative";
        case CommitSource::verifier_commit: return "verifier_commit";
    }
    return "?";
}

void CommitSet::add(Commit c) {
    auto it = std::lower_bound(entries.begin(), entries.end(), c.pos,
                               [](const Commit & e, Position p) { return e.pos < p; });
    if (it != entries.end() && it->pos == c.pos) {
        throw std::invalid_argument("commit set: duplicate position " + std::to_string(c.pos));
    }
    entries.insert(it, c);
}

bool CommitSet::contains_token(TokenId t) const {
    return std::any_of(entries.begin(), entries.end(),
                       [t](const Commit & e) { return e.token == t; });
}

int32_t SequenceState::num_blocks() const {
    if (block_len <= 0) return 0;
    return static_cast<int32_t>((gen_len + block_len - 1) / block_len);
}

Position SequenceState::block_begin(int32_t b) const {
    return prompt_len + b * block_len;
}

Position SequenceState::block_end(int32_t b) const {
    return std::min<Position>(prompt_len + (b + 1) * block_len, prompt_len + gen_len);
}

void SequenceState::validate(const Vocabulary & vocab) const {
    if (length() != prompt_len + gen_len) {
        throw std::invalid_argument("sequence state: length mismatch");
    }
    for (Position i = 0; i < prompt_len; ++i) {
        if (tokens[static_cast<size_t>(i)] == vocab.mask_id) {
            throw std::invalid_argument("sequence state: masked prompt position");
        }
    }
    for (Position i = 0; i < length(); ++i) {
        TokenId t = tokens[static_cast<size_t>(i)];
        if (t != vocab.mask_id && !vocab.is_real(t)) {
            throw std::invalid_argument("sequence state: token id out of range");
        }
    }
    // blocks before the active one are fully resolved; later blocks untouched
    for (int32_t b = 0; b < std::min(active_block, num_blocks()); ++b) {
        for (Position i = block_begin(b); i < block_end(b); ++i) {
            if (tokens[static_cast<size_t>(i)] == vocab.mask_id) {
                throw std::invalid_argument("sequence state: mask in completed block");
            }
        }
    }
    for (int32_t b = active_block + 1; b < num_blocks(); ++b) {
        for (Position i = block_begin(b); i < block_end(b); ++i) {
            if (tokens[static_cast<size_t>(i)] != vocab.mask_id) {
                throw std::invalid_argument("sequence state: committed token in inactive block");
            }
        }
    }
}

SequenceState make_initial_state(const std::vector<TokenId> & prompt, Position max_new_tokens,
                                 Position block_len, const Vocabulary & vocab) {
    if (max_new_tokens < 1) {
        throw std::invalid_argument("make_initial_state: max_new_tokens must be >= 1");
    }
    if (block_len < 1) {
        throw std::invalid_argument("make_initial_state: block_len must be >= 1");
    }
    SequenceState st;
    st.prompt_len = static_cast<Position>(prompt.size());
    st.gen_len    = max_new_tokens;
    st.block_len  = block_len;
    st.tokens     = prompt;
    st.tokens.resize(prompt.size() + static_cast<size_t>(max_new_tokens), vocab.mask_id);
    st.validate(vocab);
    return st;
}

std::vector<Position> masked_positions(const SequenceState & state, const Vocabulary & vocab,
                                       Scope scope) {
    Position lo = 0;
    Position hi = state.length();
    if (scope == Scope::active_block) {
        if (state.finished()) return {};
        lo = state.block_begin(state.active_block);
        hi = state.block_end(state.active_block);
    }
    std::vector<Position> out;
    for (Position i = lo; i < hi; ++i) {
        if (state.tokens[static_cast<size_t>(i)] == vocab.mask_id) {
            out.push_back(i);
        }
    }
    return out;
}

SequenceState apply_commits(const SequenceState & state, const Vocabulary & vocab,
                            const CommitSet & commits) {
    SequenceState next = state;
    for (const Commit & c : commits.entries) {
        if (c.pos < 0 || c.pos >= state.length()) {
            throw std::invalid_argument("apply_commits: position out of range");
        }
        if (next.tokens[static_cast<size_t>(c.pos)] != vocab.mask_id) {
            throw std::invalid_argument("apply_commits: commit to unmasked position " +
                                        std::to_string(c.pos));
        }
        if (!vocab.is_real(c.token)) {
            throw std::invalid_argument("apply_commits: token is not a real vocabulary entry");
        }
        next.tokens[static_cast<size_t>(c.pos)] = c.token;
    }
    return next;
}

SequenceState advance_block_if_complete(const SequenceState & state, const Vocabulary & vocab) {
    if (state.finished()) return state;
    for (Position i = state.block_begin(state.active_block);
         i < state.block_end(state.active_block); ++i) {
        if (state.tokens[static_cast<size_t>(i)] == vocab.mask_id) {
            return state;  // incomplete; no-op
        }
    }
    SequenceState next = state;
    next.active_block += 1;
    return next;
}

}  // namespace psd
