#pragma once

#include "psd/draft_graph.hpp"
#include "psd/policy.hpp"
#include "psd/sequence_state.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace psd {

inline constexpr int kTraceSchemaVersion = 1;

enum class EngineMode {
    psd,
    spatial_only,
    greedy_only,
};

EngineMode parse_engine_mode(const std::string & s);
const char * to_string(EngineMode m);

/// Everything observable about one decode iteration: the full spatial
/// prediction snapshot, the commits by source, and the draft round (nodes,
/// edges, per-node verifier outputs, accepted set). Self-contained enough to
/// re-check every committing rule offline.
struct IterationRecord {
    int32_t step  = 0;
    int32_t block = 0;
    int32_t forward_passes = 1;  // 1 or 2
    int32_t batch_size     = 0;  // verified draft count, 0 when no draft round

    std::vector<Prediction> preds;  // spatial pass output over the active block
    CommitSet spatial;
    std::vector<std::pair<Position, double>> sigma;  // post-spatial ordering with cached confidence

    std::vector<std::pair<int32_t, std::vector<uint32_t>>> nodes;  // node id -> effective ranks
    std::vector<std::pair<int32_t, int32_t>> edges;                // node ids
    std::vector<std::pair<int32_t, std::vector<Prediction>>> node_ver;  // verifier outputs
    std::vector<int32_t> accepted;  // node ids, ascending
    int32_t kstar = -1;             // -1 when no draft round

    CommitSet speculative;
    CommitSet verifier;

    int64_t committed_count() const {
        return static_cast<int64_t>(spatial.size() + speculative.size() + verifier.size());
    }
};

struct DecodeTrace {
    int32_t version = kTraceSchemaVersion;
    Position prompt_len = 0;
    Position block_len = 0;
    Position max_new_tokens = 0;
    EngineMode mode = EngineMode::psd;
    PolicyConfig policy;
    TopologyConfig topology;
    bool eos_stop = true;
    uint64_t seed = 0;
    TokenId vocab_size = 0;
    TokenId eos_id = 0;

    std::vector<IterationRecord> iterations;
    std::optional<Position> eos_position;  // first committed eos position
    std::vector<TokenId> final_tokens;     // prompt + generation region

    int64_t total_forward_passes() const;
    int64_t total_committed() const;
};

/// Metric truncation point per the eos accounting convention: commits at
/// positions strictly beyond `position` are ignored, iterations after
/// `iteration` (the one that committed that eos) are ignored. Both are -1
/// when the trace committed no eos.
struct EosCutoff {
    Position position = -1;
    int64_t iteration = -1;
};

EosCutoff eos_cutoff(const DecodeTrace & trace);

/// Fixed 9-digit decimal; the serialization format for every confidence.
std::string format_confidence(double c);

void write_trace_jsonl(const DecodeTrace & trace, const std::string & path);
DecodeTrace read_trace_jsonl(const std::string & path);

}  // namespace psd
