#pragma once

#include "psd/denoiser.hpp"

#include <cstdint>
#include <vector>

namespace psd {

/// Synthetic denoiser whose confidence decays linearly with the distance to
/// the nearest unmasked position (prompt counts as unmasked) and whose
/// predictions follow a reference sequence with controllable correctness.
/// The controllable stand-in for ranking-stability assumptions.
struct FrontierOracleConfig {
    std::vector<TokenId> reference;  // true tokens by absolute position; short references pad with eos
    double c_max       = 0.99;       // peak confidence
    double decay       = 0.03;       // confidence drop per unit distance (lambda)
    double noise_scale = 0.0;        // per-position jitter amplitude (s)
    double correctness = 1.0;        // probability a prediction equals the reference token (rho)
    double floor_eps   = 0.05;       // minimum confidence
    uint64_t seed      = 0;
    bool drift         = false;      // re-draw jitter per (step, context) instead of freezing per position

    void validate() const;
};

class FrontierOracle : public Denoiser {
  public:
    FrontierOracle(FrontierOracleConfig cfg, Vocabulary vocab);

    const Vocabulary & vocab() const override { return vocab_; }
    DenoiserOutput predict(const SequenceState & state, Scope scope) const override;

    /// clip(c_max - decay * dist(i, nearest unmasked) + eta_i, floor, 1).
    /// With drift off, eta_i is frozen per (position, seed), so rankings are
    /// stable across steps at fixed noise_scale.
    double confidence_at(const SequenceState & state, Position i) const;

    TokenId reference_at(Position i) const;

  private:
    TokenId prediction_token(const SequenceState & state, Position i) const;

    FrontierOracleConfig cfg_;
    Vocabulary vocab_;
};

/// Distance from i to the nearest non-mask position in either direction.
Position frontier_distance(const SequenceState & state, const Vocabulary & vocab, Position i);

}  // namespace psd
