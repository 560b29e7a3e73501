#include "psd/metrics.hpp"

#include "psd/policy.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace psd {

const char * to_string(PrecisionVariant v) {
    return v == PrecisionVariant::hit_rate ? "hit_rate" : "window_coverage";
}

double tpf(const DecodeTrace & trace) {
    const EosCutoff cut = eos_cutoff(trace);
    int64_t tokens = 0;
    int64_t passes = 0;
    for (size_t t = 0; t < trace.iterations.size(); ++t) {
        if (cut.iteration >= 0 && static_cast<int64_t>(t) > cut.iteration) break;
        const IterationRecord & rec = trace.iterations[t];
        passes += rec.forward_passes;
        for (const CommitSet * cs : {&rec.spatial, &rec.speculative, &rec.verifier}) {
            for (const Commit & c : cs->entries) {
                if (cut.position < 0 || c.pos <= cut.position) ++tokens;
            }
        }
    }
    if (passes == 0) {
        throw std::invalid_argument("tpf: trace has no forward passes");
    }
    return static_cast<double>(tokens) / static_cast<double>(passes);
}

std::vector<double> acceptance_rate_by_rank(const std::vector<DecodeTrace> & traces) {
    const std::vector<RankEstimate> est = estimate_rank_acceptance(traces);
    std::vector<double> rates;
    rates.reserve(est.size());
    for (const RankEstimate & e : est) rates.push_back(e.p_hat());
    return rates;
}

namespace {

struct PrecisionAccum {
    double sum = 0.0;
    int64_t count = 0;
    double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

template <typename PerStep>
PrecisionAccum precision_scan(const DecodeTrace & trace, int32_t k, int32_t h, PerStep per_step) {
    if (k < 1 || h < 1) {
        throw std::invalid_argument("precision: K and h must be >= 1");
    }
    const EosCutoff cut = eos_cutoff(trace);
    const size_t n = trace.iterations.size();
    PrecisionAccum acc;
    for (size_t t = 0; t + 1 < n; ++t) {
        const auto & sigma = trace.iterations[t].sigma;
        if (sigma.empty()) continue;
        std::set<Position> candidates;
        for (size_t i = 0; i < sigma.size() && i < static_cast<size_t>(k); ++i) {
            candidates.insert(sigma[i].first);
        }
        std::set<Position> decoded;
        for (size_t u = t + 1; u < n && u <= t + static_cast<size_t>(h); ++u) {
            const IterationRecord & rec = trace.iterations[u];
            for (const CommitSet * cs : {&rec.spatial, &rec.speculative, &rec.verifier}) {
                for (const Commit & c : cs->entries) {
                    if (cut.position < 0 || c.pos <= cut.position) decoded.insert(c.pos);
                }
            }
        }
        int64_t hit = 0;
        for (Position p : candidates) {
            if (decoded.count(p) != 0) ++hit;
        }
        acc.sum += per_step(hit, static_cast<int64_t>(decoded.size()));
        acc.count += 1;
    }
    return acc;
}

}  // namespace

double precision_at_k(const DecodeTrace & trace, int32_t k, int32_t h, PrecisionVariant variant) {
    return precision_scan(trace, k, h, [&](int64_t hit, int64_t d) {
        if (variant == PrecisionVariant::hit_rate) {
            return static_cast<double>(hit) / static_cast<double>(k);
        }
        return static_cast<double>(hit) / static_cast<double>(std::max<int64_t>(1, d));
    }).mean();
}

double precision_oracle_bound(const DecodeTrace & trace, int32_t k, int32_t h,
                              PrecisionVariant variant) {
    return precision_scan(trace, k, h, [&](int64_t, int64_t d) {
        const int64_t reachable = std::min<int64_t>(k, d);
        if (variant == PrecisionVariant::hit_rate) {
            return static_cast<double>(reachable) / static_cast<double>(k);
        }
        return static_cast<double>(reachable) / static_cast<double>(std::max<int64_t>(1, d));
    }).mean();
}

std::vector<ContributionBucket> contribution_profile(const std::vector<DecodeTrace> & traces,
                                                     int32_t buckets) {
    if (buckets < 1) {
        throw std::invalid_argument("contribution_profile: buckets must be >= 1");
    }
    std::vector<ContributionBucket> out(static_cast<size_t>(buckets));
    for (const DecodeTrace & trace : traces) {
        const EosCutoff cut = eos_cutoff(trace);
        std::map<int32_t, int64_t> committed_in_block;
        for (size_t t = 0; t < trace.iterations.size(); ++t) {
            if (cut.iteration >= 0 && static_cast<int64_t>(t) > cut.iteration) break;
            const IterationRecord & rec = trace.iterations[t];
            std::map<int32_t, int64_t> this_iter;
            for (const CommitSet * cs : {&rec.spatial, &rec.speculative, &rec.verifier}) {
                for (const Commit & c : cs->entries) {
                    if (cut.position >= 0 && c.pos > cut.position) continue;
                    const int32_t block = (c.pos - trace.prompt_len) / trace.block_len;
                    const int64_t before = committed_in_block[block];
                    const double progress =
                        static_cast<double>(before) / static_cast<double>(trace.block_len);
                    auto b = static_cast<size_t>(progress * buckets);
                    if (b >= static_cast<size_t>(buckets)) b = static_cast<size_t>(buckets) - 1;
                    out[b].total += 1;
                    if (c.source == CommitSource::speculative) out[b].speculative += 1;
                    this_iter[block] += 1;
                }
            }
            for (const auto & [block, n] : this_iter) committed_in_block[block] += n;
        }
    }
    for (ContributionBucket & b : out) {
        if (b.total > 0) {
            b.speculative_pct =
                100.0 * static_cast<double>(b.speculative) / static_cast<double>(b.total);
            b.spatial_pct = 100.0 - b.speculative_pct;
        }
    }
    return out;
}

MetricsReport build_metrics_report(const std::vector<DecodeTrace> & traces,
                                   const std::vector<int32_t> & k_list, int32_t h_max,
                                   int32_t buckets) {
    if (traces.empty()) {
        throw std::invalid_argument("metrics report: no traces");
    }
    MetricsReport report;
    double reveal_sum = 0.0;
    for (const DecodeTrace & t : traces) {
        report.tpf_per_trace.push_back(tpf(t));
        report.tpf_mean += report.tpf_per_trace.back();
        reveal_sum += mean_reveal_rate(t);
    }
    report.tpf_mean /= static_cast<double>(traces.size());
    report.mean_reveal_rate = reveal_sum / static_cast<double>(traces.size());
    report.acceptance_rate = acceptance_rate_by_rank(traces);
    for (PrecisionVariant v : {PrecisionVariant::hit_rate, PrecisionVariant::window_coverage}) {
        for (int32_t k : k_list) {
            for (int32_t h = 1; h <= h_max; ++h) {
                double emp = 0.0, bound = 0.0;
                for (const DecodeTrace & t : traces) {
                    emp += precision_at_k(t, k, h, v);
                    bound += precision_oracle_bound(t, k, h, v);
                }
                report.precision_curves[{v, k, h}] = emp / static_cast<double>(traces.size());
                report.oracle_curves[{v, k, h}] = bound / static_cast<double>(traces.size());
            }
        }
    }
    report.contribution = contribution_profile(traces, buckets);
    return report;
}

// ---------------------------------------------------------------------------
// trace auditor
// ---------------------------------------------------------------------------

namespace {

struct Auditor {
    const DecodeTrace & trace;
    std::vector<std::string> violations;

    Position prompt_len;
    Position gen_len;
    Position block_len;
    TokenId mask_id;
    std::vector<TokenId> replayed;  // mask_id where still masked
    int32_t active_block = 0;

    explicit Auditor(const DecodeTrace & t)
        : trace(t),
          prompt_len(t.prompt_len),
          gen_len(t.max_new_tokens),
          block_len(t.block_len),
          mask_id(t.vocab_size) {
        replayed.assign(static_cast<size_t>(prompt_len + gen_len), mask_id);
        for (Position i = 0; i < prompt_len && static_cast<size_t>(i) < t.final_tokens.size();
             ++i) {
            replayed[static_cast<size_t>(i)] = t.final_tokens[static_cast<size_t>(i)];
        }
    }

    void fail(size_t iter, const std::string & msg) {
        std::ostringstream ss;
        ss << "iteration " << iter << ": " << msg;
        violations.push_back(ss.str());
    }

    int32_t num_blocks() const { return (gen_len + block_len - 1) / block_len; }
    Position block_begin(int32_t b) const { return prompt_len + b * block_len; }
    Position block_end(int32_t b) const {
        return std::min<Position>(prompt_len + (b + 1) * block_len, prompt_len + gen_len);
    }

    std::vector<Position> masked_in_active() const {
        std::vector<Position> out;
        for (Position i = block_begin(active_block); i < block_end(active_block); ++i) {
            if (replayed[static_cast<size_t>(i)] == mask_id) out.push_back(i);
        }
        return out;
    }

    DenoiserOutput as_output(const std::vector<Prediction> & preds) const {
        DenoiserOutput o;
        o.predictions = preds;
        return o;
    }

    // selection-rule legality shared by spatial and verifier commits
    void check_selection(size_t iter, const char * label, const DenoiserOutput & preds,
                         const std::vector<Position> & masked, const CommitSet & commits) {
        for (const Commit & c : commits.entries) {
            const Prediction * p = preds.find(c.pos);
            if (p == nullptr) {
                fail(iter, std::string(label) + ": commit at unpredicted position");
                return;
            }
            if (p->token != c.token) {
                fail(iter, std::string(label) + ": committed token differs from prediction");
            }
        }
        std::set<Position> got;
        for (const Commit & c : commits.entries) got.insert(c.pos);

        const PolicyConfig & pol = trace.policy;
        std::set<Position> expected;
        switch (pol.kind) {
            case PolicyKind::greedy:
                expected.insert(preds.argmax_position());
                break;
            case PolicyKind::confidence:
                for (Position m : masked) {
                    if (preds.at(m).confidence >= pol.tau) expected.insert(m);
                }
                break;
            case PolicyKind::localleap:
                for (size_t a = 0; a < masked.size(); ++a) {
                    if (preds.at(masked[a]).confidence < pol.anchor_tau) continue;
                    expected.insert(masked[a]);
                    for (int32_t w = 1; w <= pol.window_w && w <= static_cast<int32_t>(a); ++w) {
                        expected.insert(masked[a - static_cast<size_t>(w)]);
                    }
                    for (int32_t w = 1;
                         w <= pol.window_w && a + static_cast<size_t>(w) < masked.size(); ++w) {
                        expected.insert(masked[a + static_cast<size_t>(w)]);
                    }
                }
                break;
        }
        if (expected.empty()) {
            expected.insert(preds.argmax_position());  // top1 fallback
        }
        if (expected != got) {
            fail(iter, std::string(label) + ": committed set differs from the selection rule");
        }
    }

    void apply(size_t iter, const CommitSet & commits) {
        for (const Commit & c : commits.entries) {
            if (c.pos < 0 || c.pos >= prompt_len + gen_len) {
                fail(iter, "commit out of range");
                continue;
            }
            if (replayed[static_cast<size_t>(c.pos)] != mask_id) {
                fail(iter, "commit to an already-committed position");
            }
            if (c.pos < block_begin(active_block) || c.pos >= block_end(active_block)) {
                fail(iter, "commit outside the active block");
            }
            replayed[static_cast<size_t>(c.pos)] = c.token;
        }
    }

    void check_draft_round(size_t iter, const IterationRecord & rec, const DenoiserOutput & preds,
                           const std::vector<std::pair<Position, double>> & sigma) {
        std::map<int32_t, const std::vector<uint32_t> *> ranks_of;
        for (const auto & [id, ranks] : rec.nodes) {
            if (ranks_of.count(id) != 0) fail(iter, "duplicate draft node id");
            for (uint32_t r : ranks) {
                if (r < 1 || r > sigma.size()) fail(iter, "draft rank outside sigma");
            }
            ranks_of[id] = &ranks;
        }
        if (rec.nodes.empty() || !rec.nodes.front().second.empty()) {
            fail(iter, "draft round without a root node");
            return;
        }
        {
            std::set<std::vector<uint32_t>> distinct;
            for (const auto & [id, ranks] : rec.nodes) distinct.insert(ranks);
            if (distinct.size() != rec.nodes.size()) {
                fail(iter, "effective draft subsets are not pairwise distinct");
            }
        }
        std::map<int32_t, DenoiserOutput> ver;
        for (const auto & [id, preds_v] : rec.node_ver) {
            DenoiserOutput o;
            o.predictions = preds_v;
            ver.emplace(id, std::move(o));
        }
        if (rec.batch_size != static_cast<int32_t>(rec.node_ver.size())) {
            fail(iter, "batch size differs from verified draft count");
        }
        for (const auto & [p, k] : rec.edges) {
            auto ip = ranks_of.find(p);
            auto ik = ranks_of.find(k);
            if (ip == ranks_of.end() || ik == ranks_of.end()) {
                fail(iter, "edge references unknown draft node");
                continue;
            }
            if (ip->second->size() >= ik->second->size() ||
                !std::includes(ik->second->begin(), ik->second->end(), ip->second->begin(),
                               ip->second->end())) {
                fail(iter, "edge violates strict subset inclusion");
            }
        }

        // independent acceptance closure: a node is accepted iff some already
        // accepted parent endorses every newly filled position under A_pi
        const int32_t root_id = rec.nodes.front().first;
        std::set<int32_t> closure = {root_id};
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto & [p, k] : rec.edges) {
                if (closure.count(k) != 0 || closure.count(p) == 0) continue;
                auto vit = ver.find(p);
                if (vit == ver.end()) continue;
                const auto & rp = *ranks_of[p];
                const auto & rk = *ranks_of[k];
                bool consistent = true;
                for (uint32_t r : rk) {
                    if (std::binary_search(rp.begin(), rp.end(), r)) continue;
                    const Position pos = sigma[r - 1].first;
                    const Prediction * cached = preds.find(pos);
                    if (cached == nullptr ||
                        !accepts(trace.policy, pos, cached->token, vit->second)) {
                        consistent = false;
                        break;
                    }
                }
                if (consistent) {
                    closure.insert(k);
                    grew = true;
                }
            }
        }
        std::set<int32_t> recorded(rec.accepted.begin(), rec.accepted.end());
        if (recorded != closure) {
            fail(iter, "accepted node set differs from the acceptance closure");
        }

        int32_t expect_kstar = root_id;
        size_t best_size = 0;
        for (const auto & [id, ranks] : rec.nodes) {
            if (closure.count(id) == 0) continue;
            if (ranks.size() > best_size ||
                (ranks.size() == best_size && id < expect_kstar)) {
                best_size = ranks.size();
                expect_kstar = id;
            }
        }
        if (rec.kstar != expect_kstar) {
            fail(iter, "k* is not the deepest accepted node");
        }

        // speculative commits: k*'s fills in rank order, cut at the first eos
        auto kit = ranks_of.find(rec.kstar);
        std::vector<Commit> expect_fills;
        if (kit != ranks_of.end()) {
            for (uint32_t r : *kit->second) {
                const Position pos = sigma[r - 1].first;
                const Prediction * cached = preds.find(pos);
                if (cached == nullptr) break;
                expect_fills.push_back({pos, cached->token, CommitSource::speculative,
                                        cached->confidence, static_cast<int32_t>(r)});
                if (trace.eos_stop && cached->token == trace.eos_id) break;
            }
        }
        std::vector<Commit> got_fills = rec.speculative.entries;
        std::sort(got_fills.begin(), got_fills.end(),
                  [](const Commit & a, const Commit & b) { return a.rank < b.rank; });
        bool fills_ok = got_fills.size() == expect_fills.size();
        for (size_t i = 0; fills_ok && i < got_fills.size(); ++i) {
            fills_ok = got_fills[i].pos == expect_fills[i].pos &&
                       got_fills[i].token == expect_fills[i].token &&
                       got_fills[i].rank == expect_fills[i].rank;
        }
        if (!fills_ok) {
            fail(iter, "speculative commits differ from k*'s endorsed fills");
        }
        apply(iter, rec.speculative);

        const bool cut = trace.eos_stop && rec.speculative.contains_token(trace.eos_id);
        if (cut) {
            if (!rec.verifier.empty()) {
                fail(iter, "verifier commits after an eos fill");
            }
            return;
        }
        const std::vector<Position> remaining = masked_in_active();
        if (remaining.empty()) {
            if (!rec.verifier.empty()) fail(iter, "verifier commits on a completed block");
            return;
        }
        auto kver = ver.find(rec.kstar);
        if (kver == ver.end()) {
            fail(iter, "k* has verifier commits but no verifier output");
            return;
        }
        check_selection(iter, "verifier", kver->second, remaining, rec.verifier);
        apply(iter, rec.verifier);
    }

    void run() {
        for (size_t t = 0; t < trace.iterations.size(); ++t) {
            const IterationRecord & rec = trace.iterations[t];
            if (rec.step != static_cast<int32_t>(t)) fail(t, "non-sequential step counter");
            if (rec.block != active_block) fail(t, "record block differs from replayed block");

            const std::vector<Position> masked = masked_in_active();
            const DenoiserOutput preds = as_output(rec.preds);
            {
                std::set<Position> pred_pos;
                for (const Prediction & p : rec.preds) pred_pos.insert(p.pos);
                if (pred_pos != std::set<Position>(masked.begin(), masked.end())) {
                    fail(t, "prediction snapshot does not cover the masked set");
                }
            }
            check_selection(t, "spatial", preds, masked, rec.spatial);
            apply(t, rec.spatial);

            // sigma snapshot: remaining masked ordered by cached confidence
            {
                const std::vector<Position> rem = masked_in_active();
                if (!rem.empty() || !rec.sigma.empty()) {
                    if (rec.sigma.size() != rem.size()) {
                        fail(t, "sigma does not cover the residual masked set");
                    } else {
                        std::set<Position> sp;
                        for (const auto & [pos, conf] : rec.sigma) {
                            sp.insert(pos);
                            const Prediction * p = preds.find(pos);
                            if (p == nullptr || p->confidence != conf) {
                                fail(t, "sigma confidence differs from the cached prediction");
                                break;
                            }
                        }
                        if (sp != std::set<Position>(rem.begin(), rem.end())) {
                            fail(t, "sigma positions differ from the residual masked set");
                        }
                        for (size_t i = 1; i < rec.sigma.size(); ++i) {
                            const auto & [p0, c0] = rec.sigma[i - 1];
                            const auto & [p1, c1] = rec.sigma[i];
                            if (c0 < c1 || (c0 == c1 && p0 > p1)) {
                                fail(t, "sigma not in descending-confidence order");
                                break;
                            }
                        }
                    }
                }
            }

            const bool has_round = !rec.nodes.empty();
            if (rec.forward_passes != (has_round ? 2 : 1)) {
                fail(t, "forward pass count inconsistent with the draft round");
            }
            if (has_round) {
                if (trace.mode != EngineMode::psd) fail(t, "draft round outside psd mode");
                if (trace.eos_stop && rec.spatial.contains_token(trace.eos_id)) {
                    fail(t, "draft round after a spatial eos commit");
                }
                check_draft_round(t, rec, preds, rec.sigma);
            } else {
                if (rec.batch_size != 0 || !rec.speculative.empty() || !rec.verifier.empty()) {
                    fail(t, "speculative state without a draft round");
                }
            }

            bool committed_eos = false;
            for (const CommitSet * cs : {&rec.spatial, &rec.speculative, &rec.verifier}) {
                if (cs->contains_token(trace.eos_id)) committed_eos = true;
            }
            if (trace.eos_stop && committed_eos && t + 1 != trace.iterations.size()) {
                fail(t, "decoding continued past a committed eos");
            }

            if (masked_in_active().empty() && active_block < num_blocks()) {
                active_block += 1;
            }
        }

        // final state consistency
        if (trace.final_tokens.size() != replayed.size()) {
            violations.push_back("final token array length mismatch");
        } else {
            for (size_t i = static_cast<size_t>(prompt_len); i < replayed.size(); ++i) {
                if (trace.final_tokens[i] != replayed[i]) {
                    violations.push_back("final token array differs from replayed commits");
                    break;
                }
            }
        }
        const EosCutoff cut = eos_cutoff(trace);
        const Position recorded = trace.eos_position.value_or(-1);
        if (recorded != cut.position) {
            violations.push_back("recorded eos position differs from the first committed eos");
        }
    }
};

}  // namespace

std::vector<std::string> audit_commit_legality(const DecodeTrace & trace) {
    Auditor auditor(trace);
    auditor.run();
    return auditor.violations;
}

}  // namespace psd
