#pragma once

#include "psd/draft_graph.hpp"
#include "psd/policy.hpp"
#include "psd/trace.hpp"

#include <vector>

namespace psd {

struct EngineConfig {
    EngineMode mode = EngineMode::psd;
    PolicyConfig policy;
    TopologyConfig topology;
    Position block_len = 32;
    Position max_new_tokens = 512;
    uint64_t seed = 0;
    bool eos_stop = true;

    void validate() const;
};

/// Result of one hierarchical acceptance pass.
struct AcceptanceOutcome {
    std::vector<int32_t> accepted;  // draft indices into the DraftSet, ascending; root always in
    int32_t deepest = 0;            // k*: draft index with the most fills (smallest index on ties)
    CommitSet accepted_tokens;      // fills of k*, source = speculative
    CommitSet verifier_commits;     // filled by the engine after the fills are applied
};

/// Topological traversal of the draft set: the root is unconditionally
/// accepted; a node is accepted iff some accepted parent endorses every newly
/// speculated position under A_pi evaluated on that parent's verifier output.
/// verification[i] is the verifier output for drafts[i] (empty predictions
/// allowed for drafts with nothing left masked).
AcceptanceOutcome hierarchical_accept(const DraftSet & drafts,
                                      const std::vector<DenoiserOutput> & verification,
                                      const SpeculativeOrdering & sigma,
                                      const DenoiserOutput & cached,
                                      const PolicyConfig & policy);

/// The selection rule (not A_pi) applied to the deepest node's verifier
/// output over the positions still masked after its fills; empty when the
/// block is already complete.
CommitSet verifier_commit_set(const PolicyConfig & policy, const SequenceState & state_after_fills,
                              const Vocabulary & vocab, const DenoiserOutput & kstar_verification,
                              int32_t step);

struct DecodeResult {
    SequenceState final_state;
    DecodeTrace trace;
};

/// Full decoding loop. psd mode runs, per iteration: one spatial pass with
/// policy selection, then (while the block is incomplete) drafting from the
/// cached predictions, one batched verification pass, hierarchical
/// acceptance, and verifier commits. spatial_only / greedy_only run the
/// spatial stage alone. Decoding stops once eos is committed when eos_stop
/// is set; accepted fills are applied in rank order and cut at the first eos
/// fill so nothing is committed "after" the sequence ends.
DecodeResult decode(const EngineConfig & config, const Denoiser & denoiser,
                    const std::vector<TokenId> & prompt,
                    const DraftGraph * graph_override = nullptr);

/// Stage-1-only reference loop (equivalence oracle for the root-only graph).
DecodeResult decode_spatial_only(EngineConfig config, const Denoiser & denoiser,
                                 const std::vector<TokenId> & prompt);

/// Protocol output: the generation region truncated at the first eos
/// (inclusive); never-committed positions read as mask_id.
std::vector<TokenId> generated_output(const DecodeTrace & trace);

}  // namespace psd
