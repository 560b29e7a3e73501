#include "psd/policy.hpp"

#include "psd/trace.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace psd {

PolicyKind parse_policy_kind(const std::string & s) {
    if (s == "greedy") return PolicyKind::greedy;
    if (s == "confidence") return PolicyKind::confidence;
    if (s == "localleap") return PolicyKind::localleap;
    throw std::invalid_argument("unknown policy kind: '" + s + "'");
}

FallbackMode parse_fallback_mode(const std::string & s) {
    if (s == "top1") return FallbackMode::top1;
    if (s == "stall_error") return FallbackMode::stall_error;
    throw std::invalid_argument("unknown fallback mode: '" + s + "'");
}

const char * to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::greedy:     return "greedy";
        case PolicyKind::confidence: return "confidence";
        case PolicyKind::localleap:  return "localleap";
    }
    return "?";
}

const char * to_string(FallbackMode m) {
    return m == FallbackMode::top1 ? "top1" : "stall_error";
}

std::string policy_label(PolicyKind k) {
    if (k == PolicyKind::localleap) return "localleap-style";
    return to_string(k);
}

void PolicyConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("policy: tau must be in (0,1)");
    }
    if (!(anchor_tau > 0.0 && anchor_tau < 1.0)) {
        throw std::invalid_argument("policy: anchor_tau must be in (0,1)");
    }
    if (window_w < 0) {
        throw std::invalid_argument("policy: window_w must be >= 0");
    }
}

namespace {

Position fallback_top1(const PolicyConfig & policy, const DenoiserOutput & preds) {
    if (policy.fallback == FallbackMode::stall_error) {
        throw std::runtime_error("policy: empty selection with fallback=stall_error");
    }
    return preds.argmax_position();
}

std::vector<Position> localleap_select(const PolicyConfig & policy,
                                       const std::vector<Position> & masked,
                                       const DenoiserOutput & preds) {
    std::set<Position> chosen;
    for (size_t a = 0; a < masked.size(); ++a) {
        if (preds.at(masked[a]).confidence < policy.anchor_tau) continue;
        chosen.insert(masked[a]);
        // window_w nearest masked positions per side, not index offsets
        for (int32_t k = 1; k <= policy.window_w && k <= static_cast<int32_t>(a); ++k) {
            chosen.insert(masked[a - static_cast<size_t>(k)]);
        }
        for (int32_t k = 1; k <= policy.window_w && a + static_cast<size_t>(k) < masked.size();
             ++k) {
            chosen.insert(masked[a + static_cast<size_t>(k)]);
        }
    }
    return {chosen.begin(), chosen.end()};
}

}  // namespace

TransferDecision select(const PolicyConfig & policy, const std::vector<Position> & masked,
                        const DenoiserOutput & preds, int32_t step) {
    if (masked.empty()) {
        throw std::invalid_argument("select: no masked positions");
    }
    for (Position p : masked) {
        preds.at(p);  // preds must cover the masked set
    }

    TransferDecision td;
    td.policy_id = policy_label(policy.kind);
    td.step = step;

    switch (policy.kind) {
        case PolicyKind::greedy:
            td.selected.push_back(preds.argmax_position());
            break;
        case PolicyKind::confidence:
            for (Position p : masked) {
                if (preds.at(p).confidence >= policy.tau) td.selected.push_back(p);
            }
            break;
        case PolicyKind::localleap:
            td.selected = localleap_select(policy, masked, preds);
            break;
    }
    if (td.selected.empty()) {
        td.selected.push_back(fallback_top1(policy, preds));
    }
    return td;
}

bool accepts(const PolicyConfig & policy, Position pos, TokenId speculated_token,
             const DenoiserOutput & parent_verifier) {
    const Prediction * vp = parent_verifier.find(pos);
    if (vp == nullptr || vp->token != speculated_token) {
        return false;
    }
    if (policy.kind == PolicyKind::greedy) {
        return parent_verifier.argmax_position() == pos;
    }
    return vp->confidence >= policy.tau;
}

double mean_reveal_rate(const DecodeTrace & trace) {
    const EosCutoff cut = eos_cutoff(trace);
    int64_t revealed = 0;
    int64_t steps = 0;
    for (size_t t = 0; t < trace.iterations.size(); ++t) {
        if (cut.iteration >= 0 && static_cast<int64_t>(t) > cut.iteration) break;
        for (const Commit & c : trace.iterations[t].spatial.entries) {
            if (cut.position < 0 || c.pos <= cut.position) ++revealed;
        }
        ++steps;
    }
    if (steps == 0) {
        throw std::invalid_argument("mean_reveal_rate: trace has no spatial steps");
    }
    return static_cast<double>(revealed) / static_cast<double>(steps);
}

}  // namespace psd
