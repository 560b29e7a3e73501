#pragma once

#include "psd/trace.hpp"

#include <map>
#include <string>
#include <vector>

namespace psd {

enum class PrecisionVariant {
    hit_rate,         // |C_t ∩ D_{t,h}| / K
    window_coverage,  // |C_t ∩ D_{t,h}| / max(1, |D_{t,h}|)
};

const char * to_string(PrecisionVariant v);

/// Tokens decoded per model invocation, truncated at the eos position and at
/// the iteration that committed it.
double tpf(const DecodeTrace & trace);

/// For rank j: fraction of iterations offering chain rank j in which it was
/// accepted. Sized to the deepest rank ever offered.
std::vector<double> acceptance_rate_by_rank(const std::vector<DecodeTrace> & traces);

/// Lookahead precision of the sigma snapshot: C_t = top-K candidates at
/// iteration t, D_{t,h} = positions committed during iterations t+1..t+h,
/// averaged over iterations with a candidate set and at least one subsequent
/// iteration.
double precision_at_k(const DecodeTrace & trace, int32_t k, int32_t h, PrecisionVariant variant);

/// The matching oracle upper bound (set-cardinality ceiling of the same
/// average).
double precision_oracle_bound(const DecodeTrace & trace, int32_t k, int32_t h,
                              PrecisionVariant variant);

struct ContributionBucket {
    int64_t total = 0;
    int64_t speculative = 0;  // the rest committed via the spatial selection rule
    double speculative_pct = 0.0;
    double spatial_pct = 0.0;  // spatial + verifier commits (both apply the selection rule)
};

/// Commit provenance over normalized block progress (tokens committed in the
/// block before this one, divided by L), bucketed.
std::vector<ContributionBucket> contribution_profile(const std::vector<DecodeTrace> & traces,
                                                     int32_t buckets);

struct MetricsReport {
    double tpf_mean = 0.0;
    double mean_reveal_rate = 0.0;
    std::vector<double> tpf_per_trace;
    std::vector<double> acceptance_rate;
    // (variant, K, h) -> averaged value over traces
    std::map<std::tuple<PrecisionVariant, int32_t, int32_t>, double> precision_curves;
    std::map<std::tuple<PrecisionVariant, int32_t, int32_t>, double> oracle_curves;
    std::vector<ContributionBucket> contribution;
};

MetricsReport build_metrics_report(const std::vector<DecodeTrace> & traces,
                                   const std::vector<int32_t> & k_list, int32_t h_max,
                                   int32_t buckets);

/// Re-checks every committed token against its committing rule from the trace
/// alone: spatial and verifier commits against the policy's selection rule on
/// the recorded predictions, speculative commits against an independently
/// recomputed acceptance closure over the recorded draft round. Returns one
/// message per violation; empty means the trace is legal.
std::vector<std::string> audit_commit_legality(const DecodeTrace & trace);

}  // namespace psd
