#pragma once

#include "psd/sequence_state.hpp"
#include "psd/vocabulary.hpp"

#include <cstdint>
#include <vector>

namespace psd {

/// Argmax token and its confidence for one masked position.
struct Prediction {
    Position pos;
    TokenId  token;
    double   confidence;  // in (0,1], quantized to the 1e-9 grid
};

/// One forward pass worth of predictions, keyed by position (sorted, unique),
/// exactly over the masked positions of the query scope.
struct DenoiserOutput {
    std::vector<Prediction> predictions;
    uint64_t query_fingerprint = 0;

    const Prediction * find(Position pos) const;
    const Prediction & at(Position pos) const;

    /// Position of the highest-confidence prediction, leftmost on ties.
    Position argmax_position() const;
};

uint64_t state_fingerprint(const SequenceState & state);

/// The model abstraction: one forward pass yields a prediction for every
/// masked position in scope. Implementations are immutable after
/// construction and predict is a pure function of (config, seed, state).
class Denoiser {
  public:
    virtual ~Denoiser() = default;

    virtual const Vocabulary & vocab() const = 0;

    /// Errors if the scope holds no masked position (the engine must not
    /// issue empty queries).
    virtual DenoiserOutput predict(const SequenceState & state, Scope scope) const = 0;

    /// Elementwise identical to predict on each state, in input order.
    /// Counted as ONE model invocation by the engine's trace.
    virtual std::vector<DenoiserOutput> predict_batch(const std::vector<SequenceState> & states,
                                                      Scope scope) const;
};

}  // namespace psd
