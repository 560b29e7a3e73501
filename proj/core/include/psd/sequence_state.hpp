#pragma once

#include "psd/vocabulary.hpp"

#include <cstdint>
#include <vector>

namespace psd {

enum class Scope {
    active_block,
    whole_sequence,
};

enum class CommitSource {
    spatial,
    speculative,
    verifier_commit,
};

const char * to_string(CommitSource s);

struct Commit {
    Position      pos;
    TokenId       token;
    CommitSource  source;
    double        confidence = 0.0;  // confidence of the prediction that was committed
    int32_t       rank       = 0;    // 1-based sigma rank for speculative commits, else 0
};

/// Set of positions to unmask in one update. Entries are kept sorted by
/// position and unique; every entry must target a currently masked position.
struct CommitSet {
    std::vector<Commit> entries;

    void add(Commit c);
    bool empty() const { return entries.empty(); }
    size_t size() const { return entries.size(); }
    bool contains_token(TokenId t) const;
};

/// Partially masked token array over prompt + a pre-allocated generation
/// region split into blocks of block_len (the last block may be shorter).
/// Values are immutable after construction; updates return new states.
struct SequenceState {
    std::vector<TokenId> tokens;
    Position prompt_len   = 0;
    Position gen_len      = 0;   // generation region length (max_new_tokens)
    Position block_len    = 0;
    int32_t  active_block = 0;
    int32_t  step         = 0;

    Position length() const { return static_cast<Position>(tokens.size()); }
    int32_t  num_blocks() const;
    Position block_begin(int32_t b) const;
    Position block_end(int32_t b) const;  // one past last position of block b
    bool     finished() const { return active_block >= num_blocks(); }

    SequenceState with_step(int32_t s) const {
        SequenceState st = *this;
        st.step = s;
        return st;
    }

    void validate(const Vocabulary & vocab) const;
};

/// prompt followed by max_new_tokens mask positions, block 0 active.
SequenceState make_initial_state(const std::vector<TokenId> & prompt, Position max_new_tokens,
                                 Position block_len, const Vocabulary & vocab);

/// Ascending positions holding mask_id within the scope.
std::vector<Position> masked_positions(const SequenceState & state, const Vocabulary & vocab,
                                       Scope scope);

/// Writes the committed tokens; all other positions unchanged. The step
/// counter is not touched here (the engine owns it). Committing to an
/// unmasked position is a hard error: it signals an engine bug.
SequenceState apply_commits(const SequenceState & state, const Vocabulary & vocab,
                            const CommitSet & commits);

/// If the active block holds no masks, activates the next block (positions in
/// later blocks are already mask_id by construction). Idempotent on an
/// incomplete block. Completing the last block makes finished() true.
SequenceState advance_block_if_complete(const SequenceState & state, const Vocabulary & vocab);

}  // namespace psd
