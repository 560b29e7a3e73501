#include "psd/denoiser.hpp"

#include "psd/hashing.hpp"

#include <stdexcept>

namespace psd {

const Prediction * DenoiserOutput::find(Position pos) const {
    size_t lo = 0, hi = predictions.size();
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (predictions[mid].pos < pos) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (lo < predictions.size() && predictions[lo].pos == pos) return &predictions[lo];
    return nullptr;
}

const Prediction & DenoiserOutput::at(Position pos) const {
    const Prediction * p = find(pos);
    if (p == nullptr) {
        throw std::invalid_argument("denoiser output: no prediction at position " +
                                    std::to_string(pos));
    }
    return *p;
}

Position DenoiserOutput::argmax_position() const {
    if (predictions.empty()) {
        throw std::invalid_argument("denoiser output: argmax over empty output");
    }
    const Prediction * best = &predictions.front();
    for (const Prediction & p : predictions) {
        if (p.confidence > best->confidence) best = &p;  // '>' keeps the leftmost on ties
    }
    return best->pos;
}

uint64_t state_fingerprint(const SequenceState & state) {
    uint64_t h = fnv1a64(state.tokens.data(), state.tokens.size() * sizeof(TokenId));
    return hash_words({h, static_cast<uint64_t>(state.step),
                       static_cast<uint64_t>(state.active_block)});
}

std::vector<DenoiserOutput> Denoiser::predict_batch(const std::vector<SequenceState> & states,
                                                    Scope scope) const {
    if (states.empty()) {
        throw std::invalid_argument("predict_batch: empty batch");
    }
    std::vector<DenoiserOutput> out;
    out.reserve(states.size());
    for (const SequenceState & s : states) {
        out.push_back(predict(s, scope));
    }
    return out;
}

}  // namespace psd
