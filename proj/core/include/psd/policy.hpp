#pragma once

#include "psd/denoiser.hpp"

#include <string>
#include <vector>

namespace psd {

struct DecodeTrace;  // trace.hpp

enum class PolicyKind {
    greedy,
    confidence,
    localleap,
};

enum class FallbackMode {
    top1,        // commit the single argmax position when nothing qualifies
    stall_error, // strict mode: error instead
};

PolicyKind parse_policy_kind(const std::string & s);
FallbackMode parse_fallback_mode(const std::string & s);
const char * to_string(PolicyKind k);
const char * to_string(FallbackMode m);
/// Output label; the localleap variant is a reimplementation from a one-line
/// description and is labeled "localleap-style" everywhere it is reported.
std::string policy_label(PolicyKind k);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::confidence;
    double tau        = 0.9;  // commit / acceptance threshold (confidence, localleap A_pi)
    double anchor_tau = 0.9;  // anchor threshold (localleap selection)
    int32_t window_w  = 1;    // masked neighbors selected per side of each anchor
    FallbackMode fallback = FallbackMode::top1;

    void validate() const;
};

/// The positions a transfer policy chose to unmask at one step.
struct TransferDecision {
    std::vector<Position> selected;  // ascending
    std::string policy_id;
    int32_t step = 0;
};

/// Stage-1 selection rule.
///   greedy:     the single highest-confidence position (leftmost tie)
///   confidence: all positions with confidence >= tau
///   localleap:  anchors (confidence >= anchor_tau) plus the window_w nearest
///               masked positions on each side of each anchor
/// An empty selection triggers the fallback: top1 commits the argmax
/// position, stall_error throws.
TransferDecision select(const PolicyConfig & policy, const std::vector<Position> & masked,
                        const DenoiserOutput & preds, int32_t step);

/// Per-token acceptance criterion A_pi, evaluated against the parent node's
/// verifier output. confidence/localleap accept a token match at confidence
/// >= tau; greedy additionally requires that the position is the verifier's
/// argmax-confidence masked position (so an accepted fill reproduces exactly
/// the commit greedy selection would make on the parent state).
bool accepts(const PolicyConfig & policy, Position pos, TokenId speculated_token,
             const DenoiserOutput & parent_verifier);

/// Mean |T^(t)| over the trace's spatial steps (eos-truncated like every
/// other metric).
double mean_reveal_rate(const DecodeTrace & trace);

}  // namespace psd
