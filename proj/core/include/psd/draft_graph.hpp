#pragma once

#include "psd/denoiser.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace psd {

struct DecodeTrace;  // trace.hpp

/// Residual masked positions of the active block, sorted by descending cached
/// confidence (leftmost-first on ties). Ranks are 1-based throughout: rank r
/// names positions[r-1].
struct SpeculativeOrdering {
    std::vector<Position> positions;
    std::vector<double> confidences;  // aligned with positions, non-increasing

    size_t m() const { return positions.size(); }
};

/// DAG node: a subset of sigma ranks to fill speculatively. Subsets are
/// defined over ranks, not absolute positions, so one graph serves all steps.
struct DraftNode {
    int32_t id = 0;
    std::vector<uint32_t> ranks;  // sorted ascending, 1-based; empty for root
};

struct DraftGraph {
    std::vector<DraftNode> nodes;               // root first; |ranks| non-decreasing
    std::vector<std::pair<int32_t, int32_t>> edges;  // (parent, child) node ids

    int32_t node_count() const { return static_cast<int32_t>(nodes.size()); }
    const DraftNode & node(int32_t id) const { return nodes[static_cast<size_t>(id)]; }

    /// Strict subset inclusion per edge, acyclicity, root = empty subset,
    /// every non-root node reachable via >= 1 parent.
    void validate() const;
};

/// Chain-plus-skip topology family. depth d gives chain nodes {1..j}; branch
/// b adds, per depth j and sibling q in 1..b, a skip node {1..j-1, j+q}
/// (capped at rank d) with edges from C_{j-1} and into C_{j+q}. Nodes beyond
/// budget are dropped in breadth-first order.
struct TopologyConfig {
    int32_t depth  = 3;
    int32_t branch = 0;
    int32_t budget = 64;  // K_max including the root

    void validate() const;
};

DraftGraph build_topology(const TopologyConfig & cfg);

/// Sequence realizing one node: cached predictions at the materialized subset
/// of sigma ranks, the post-spatial state everywhere else.
struct DraftSequence {
    int32_t node_id = 0;
    std::vector<uint32_t> ranks;     // effective subset (ranks > m dropped), ascending
    std::vector<Position> filled;    // positions of those ranks, ascending
    std::vector<TokenId> tokens;     // full sequence
};

/// Assembled drafts plus the surviving edges after rank truncation and
/// deduplication (parents remapped onto their retained representatives).
struct DraftSet {
    std::vector<DraftSequence> drafts;               // root first, |ranks| non-decreasing
    std::vector<std::pair<int32_t, int32_t>> edges;  // indices into drafts
};

SpeculativeOrdering speculative_ordering(const SequenceState & post_state,
                                         const Vocabulary & vocab,
                                         const DenoiserOutput & cached);

/// Pure index-level assembly per the draft definition; no model call. Ranks
/// beyond m are silently dropped; nodes whose effective subset collapses onto
/// an earlier node are deduplicated.
DraftSet assemble_drafts(const SequenceState & post_state, const SpeculativeOrdering & sigma,
                         const DenoiserOutput & cached, const DraftGraph & graph);

/// Per-rank acceptance statistics harvested from chain-probe traces.
struct RankEstimate {
    int64_t offered = 0;
    int64_t accepted = 0;
    double p_hat() const { return offered == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(offered); }
};

std::vector<RankEstimate> estimate_rank_acceptance(const std::vector<DecodeTrace> & traces);

/// Expected filled count of the deepest accepted node under independent
/// per-rank acceptance probabilities (exhaustive over pass sets).
double expected_accepted_tokens(const DraftGraph & graph, const std::vector<double> & p_rank);

/// Offline topology calibration: estimates per-rank acceptance from chain
/// probe traces, then greedily grows the chain+skip family node set by
/// marginal expected accepted-token gain until the budget. Edges of the
/// result are all strict-subset pairs.
DraftGraph calibrate_topology(const std::vector<DecodeTrace> & traces, int32_t k_max,
                              std::vector<RankEstimate> * stats_out = nullptr);

void save_draft_graph(const DraftGraph & graph, const std::string & path);
DraftGraph load_draft_graph(const std::string & path);

}  // namespace psd
