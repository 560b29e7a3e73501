#include "psd/frontier_oracle.hpp"

#include "psd/hashing.hpp"

#include <algorithm>
#include <stdexcept>

namespace psd {

namespace {

constexpr uint64_t kStreamNoise   = 0x6e6f697365ull;
constexpr uint64_t kStreamCorrect = 0x636f727265ull;
constexpr uint64_t kStreamWrong   = 0x77726f6e67ull;

int32_t unmask_count(const SequenceState & state, const Vocabulary & vocab) {
    int32_t n = 0;
    for (TokenId t : state.tokens) {
        if (t != vocab.mask_id) ++n;
    }
    return n;
}

}  // namespace

void FrontierOracleConfig::validate() const {
    if (!(floor_eps > 0.0 && floor_eps <= c_max && c_max <= 1.0)) {
        throw std::invalid_argument("frontier oracle: need 0 < floor <= c_max <= 1");
    }
    if (floor_eps < 1e-9) {
        throw std::invalid_argument("frontier oracle: floor below the 1e-9 confidence grid");
    }
    if (correctness < 0.0 || correctness > 1.0) {
        throw std::invalid_argument("frontier oracle: correctness must be in [0,1]");
    }
    if (decay < 0.0) {
        throw std::invalid_argument("frontier oracle: decay must be >= 0");
    }
    if (noise_scale < 0.0) {
        throw std::invalid_argument("frontier oracle: noise_scale must be >= 0");
    }
}

FrontierOracle::FrontierOracle(FrontierOracleConfig cfg, Vocabulary vocab)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    cfg_.validate();
    vocab_.validate();
    for (TokenId t : cfg_.reference) {
        if (!vocab_.is_real(t)) {
            throw std::invalid_argument("frontier oracle: reference token out of vocabulary");
        }
    }
}

Position frontier_distance(const SequenceState & state, const Vocabulary & vocab, Position i) {
    const Position n = state.length();
    for (Position d = 1; d < n; ++d) {
        Position l = i - d;
        Position r = i + d;
        if (l >= 0 && state.tokens[static_cast<size_t>(l)] != vocab.mask_id) return d;
        if (r < n && state.tokens[static_cast<size_t>(r)] != vocab.mask_id) return d;
    }
    return n;  // fully masked sequence; treated as maximally far
}

TokenId FrontierOracle::reference_at(Position i) const {
    if (i >= 0 && static_cast<size_t>(i) < cfg_.reference.size()) {
        return cfg_.reference[static_cast<size_t>(i)];
    }
    return vocab_.eos_id;
}

double FrontierOracle::confidence_at(const SequenceState & state, Position i) const {
    const Position dist = frontier_distance(state, vocab_, i);
    double eta = 0.0;
    if (cfg_.noise_scale > 0.0) {
        uint64_t h;
        if (cfg_.drift) {
            h = hash_words({cfg_.seed, kStreamNoise, static_cast<uint64_t>(i),
                            static_cast<uint64_t>(state.step),
                            static_cast<uint64_t>(unmask_count(state, vocab_))});
        } else {
            h = hash_words({cfg_.seed, kStreamNoise, static_cast<uint64_t>(i)});
        }
        eta = cfg_.noise_scale * (2.0 * hash_u01(h) - 1.0);
    }
    double c = cfg_.c_max - cfg_.decay * static_cast<double>(dist) + eta;
    c = std::clamp(c, cfg_.floor_eps, 1.0);
    return quantize_confidence(c);
}

TokenId FrontierOracle::prediction_token(const SequenceState & state, Position i) const {
    const TokenId truth = reference_at(i);
    const double u = hash_u01(hash_words({cfg_.seed, kStreamCorrect, static_cast<uint64_t>(i)}));
    if (u < cfg_.correctness) {
        return truth;
    }
    // Seeded wrong token != truth. The rotation is shifted by the query
    // state's unmask count so that drafts at different fill depths disagree
    // with the cached draw instead of silently reproducing it.
    const uint64_t h = hash_words({cfg_.seed, kStreamWrong, static_cast<uint64_t>(i)});
    const auto v = static_cast<uint64_t>(vocab_.size);
    const uint64_t rot =
        1 + (h + static_cast<uint64_t>(unmask_count(state, vocab_))) % (v - 1);
    return static_cast<TokenId>((static_cast<uint64_t>(truth) + rot) % v);
}

DenoiserOutput FrontierOracle::predict(const SequenceState & state, Scope scope) const {
    const std::vector<Position> masked = masked_positions(state, vocab_, scope);
    if (masked.empty()) {
        throw std::invalid_argument("frontier oracle: query has no masked positions");
    }
    DenoiserOutput out;
    out.query_fingerprint = state_fingerprint(state);
    out.predictions.reserve(masked.size());
    for (Position i : masked) {
        out.predictions.push_back({i, prediction_token(state, i), confidence_at(state, i)});
    }
    return out;
}

}  // namespace psd
