#include "psd/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace psd {

void EngineConfig::validate() const {
    if (block_len < 1) {
        throw std::invalid_argument("engine: block_len must be >= 1");
    }
    if (max_new_tokens < 1) {
        throw std::invalid_argument("engine: max_new_tokens must be >= 1");
    }
    policy.validate();
    topology.validate();
}

AcceptanceOutcome hierarchical_accept(const DraftSet & drafts,
                                      const std::vector<DenoiserOutput> & verification,
                                      const SpeculativeOrdering & sigma,
                                      const DenoiserOutput & cached,
                                      const PolicyConfig & policy) {
    const size_t n = drafts.drafts.size();
    if (n == 0 || !drafts.drafts.front().ranks.empty()) {
        throw std::invalid_argument("hierarchical_accept: draft set must start at the root");
    }
    if (verification.size() != n) {
        throw std::invalid_argument("hierarchical_accept: one verifier output per draft required");
    }

    std::vector<std::vector<int32_t>> parents(n);
    for (const auto & [p, k] : drafts.edges) {
        if (p < 0 || k < 0 || p >= static_cast<int32_t>(n) || k >= static_cast<int32_t>(n) ||
            p >= k) {
            throw std::invalid_argument("hierarchical_accept: edges must point forward");
        }
        parents[static_cast<size_t>(k)].push_back(p);
    }

    std::vector<bool> ok(n, false);
    ok[0] = true;  // root carries no speculation
    for (size_t k = 1; k < n; ++k) {
        const auto & ranks_k = drafts.drafts[k].ranks;
        for (int32_t p : parents[k]) {
            const auto & ranks_p = drafts.drafts[static_cast<size_t>(p)].ranks;
            if (!ok[static_cast<size_t>(p)]) continue;
            bool consistent = true;
            for (uint32_t r : ranks_k) {
                if (std::binary_search(ranks_p.begin(), ranks_p.end(), r)) continue;
                const Position pos = sigma.positions[r - 1];
                if (!accepts(policy, pos, cached.at(pos).token,
                             verification[static_cast<size_t>(p)])) {
                    consistent = false;
                    break;
                }
            }
            if (consistent) {
                ok[k] = true;
                break;  // consistent with at least one accepted parent
            }
        }
    }

    AcceptanceOutcome outcome;
    size_t best = 0;
    for (size_t k = 0; k < n; ++k) {
        if (!ok[k]) continue;
        outcome.accepted.push_back(static_cast<int32_t>(k));
        if (drafts.drafts[k].ranks.size() > drafts.drafts[best].ranks.size()) {
            best = k;  // '>' keeps the smallest index on ties
        }
    }
    outcome.deepest = static_cast<int32_t>(best);
    for (uint32_t r : drafts.drafts[best].ranks) {
        const Position pos = sigma.positions[r - 1];
        const Prediction & pred = cached.at(pos);
        outcome.accepted_tokens.add(
            {pos, pred.token, CommitSource::speculative, pred.confidence,
             static_cast<int32_t>(r)});
    }
    return outcome;
}

CommitSet verifier_commit_set(const PolicyConfig & policy, const SequenceState & state_after_fills,
                              const Vocabulary & vocab, const DenoiserOutput & kstar_verification,
                              int32_t step) {
    CommitSet out;
    const std::vector<Position> masked =
        masked_positions(state_after_fills, vocab, Scope::active_block);
    if (masked.empty()) {
        return out;  // block complete; nothing to commit
    }
    const TransferDecision td = select(policy, masked, kstar_verification, step);
    for (Position pos : td.selected) {
        const Prediction & p = kstar_verification.at(pos);
        out.add({pos, p.token, CommitSource::verifier_commit, p.confidence, 0});
    }
    return out;
}

namespace {

CommitSet spatial_commit_set(const TransferDecision & td, const DenoiserOutput & out) {
    CommitSet cs;
    for (Position pos : td.selected) {
        const Prediction & p = out.at(pos);
        cs.add({pos, p.token, CommitSource::spatial, p.confidence, 0});
    }
    return cs;
}

}  // namespace

DecodeResult decode(const EngineConfig & config, const Denoiser & denoiser,
                    const std::vector<TokenId> & prompt, const DraftGraph * graph_override) {
    config.validate();
    const Vocabulary & vocab = denoiser.vocab();

    PolicyConfig policy = config.policy;
    if (config.mode == EngineMode::greedy_only) {
        policy.kind = PolicyKind::greedy;
    }

    DraftGraph graph;
    if (config.mode == EngineMode::psd) {
        graph = graph_override != nullptr ? *graph_override : build_topology(config.topology);
        graph.validate();
    }

    SequenceState state = make_initial_state(prompt, config.max_new_tokens, config.block_len, vocab);

    DecodeTrace trace;
    trace.prompt_len = state.prompt_len;
    trace.block_len = config.block_len;
    trace.max_new_tokens = config.max_new_tokens;
    trace.mode = config.mode;
    trace.policy = policy;
    trace.topology = config.topology;
    trace.eos_stop = config.eos_stop;
    trace.seed = config.seed;
    trace.vocab_size = vocab.size;
    trace.eos_id = vocab.eos_id;

    while (!state.finished()) {
        IterationRecord rec;
        rec.step = state.step;
        rec.block = state.active_block;

        // Stage 1: one forward pass over the active block, policy selection
        const std::vector<Position> masked = masked_positions(state, vocab, Scope::active_block);
        const DenoiserOutput out = denoiser.predict(state, Scope::active_block);
        rec.preds = out.predictions;
        const TransferDecision td = select(policy, masked, out, state.step);
        rec.spatial = spatial_commit_set(td, out);
        state = apply_commits(state, vocab, rec.spatial);
        bool stop = config.eos_stop && rec.spatial.contains_token(vocab.eos_id);

        const std::vector<Position> remaining =
            masked_positions(state, vocab, Scope::active_block);
        SpeculativeOrdering sigma;
        if (!remaining.empty()) {
            sigma = speculative_ordering(state, vocab, out);
            for (size_t i = 0; i < sigma.positions.size(); ++i) {
                rec.sigma.emplace_back(sigma.positions[i], sigma.confidences[i]);
            }
        }

        if (config.mode == EngineMode::psd && !remaining.empty() && !stop) {
            // Stage 2: index-level drafting from the cached step predictions
            const DraftSet drafts = assemble_drafts(state, sigma, out, graph);
            for (const DraftSequence & d : drafts.drafts) {
                rec.nodes.emplace_back(d.node_id, d.ranks);
            }
            for (const auto & [p, k] : drafts.edges) {
                rec.edges.emplace_back(drafts.drafts[static_cast<size_t>(p)].node_id,
                                       drafts.drafts[static_cast<size_t>(k)].node_id);
            }

            // Stage 3: one batched verification pass over all drafts that
            // still hold masks (a fully filled draft has nothing to verify)
            std::vector<SequenceState> batch;
            std::vector<int32_t> batch_of(drafts.drafts.size(), -1);
            for (size_t i = 0; i < drafts.drafts.size(); ++i) {
                if (drafts.drafts[i].ranks.size() < sigma.m()) {
                    batch_of[i] = static_cast<int32_t>(batch.size());
                    SequenceState draft_state = state;
                    draft_state.tokens = drafts.drafts[i].tokens;
                    batch.push_back(std::move(draft_state));
                }
            }
            const std::vector<DenoiserOutput> batch_out =
                denoiser.predict_batch(batch, Scope::active_block);
            rec.forward_passes = 2;
            rec.batch_size = static_cast<int32_t>(batch.size());

            std::vector<DenoiserOutput> verification(drafts.drafts.size());
            for (size_t i = 0; i < drafts.drafts.size(); ++i) {
                if (batch_of[i] >= 0) {
                    verification[i] = batch_out[static_cast<size_t>(batch_of[i])];
                    rec.node_ver.emplace_back(drafts.drafts[i].node_id,
                                              verification[i].predictions);
                }
            }

            const AcceptanceOutcome outcome =
                hierarchical_accept(drafts, verification, sigma, out, policy);
            for (int32_t a : outcome.accepted) {
                rec.accepted.push_back(drafts.drafts[static_cast<size_t>(a)].node_id);
            }
            rec.kstar = drafts.drafts[static_cast<size_t>(outcome.deepest)].node_id;

            // Fills commit in rank order; with eos early stopping nothing is
            // committed past the first eos fill and the verifier step is
            // skipped, mirroring how the single-step loop would have halted.
            CommitSet fills;
            bool cut = false;
            for (uint32_t r : drafts.drafts[static_cast<size_t>(outcome.deepest)].ranks) {
                const Position pos = sigma.positions[r - 1];
                const Prediction & pred = out.at(pos);
                fills.add({pos, pred.token, CommitSource::speculative, pred.confidence,
                           static_cast<int32_t>(r)});
                if (config.eos_stop && pred.token == vocab.eos_id) {
                    cut = true;
                    break;
                }
            }
            state = apply_commits(state, vocab, fills);
            rec.speculative = fills;

            if (cut) {
                stop = true;
            } else {
                const CommitSet vc = verifier_commit_set(
                    policy, state, vocab, verification[static_cast<size_t>(outcome.deepest)],
                    state.step);
                state = apply_commits(state, vocab, vc);
                rec.verifier = vc;
                stop = config.eos_stop && vc.contains_token(vocab.eos_id);
            }
        }

        state = advance_block_if_complete(state, vocab);
        state = state.with_step(state.step + 1);
        trace.iterations.push_back(std::move(rec));
        if (stop) break;
    }

    trace.final_tokens = state.tokens;
    const EosCutoff cut = eos_cutoff(trace);
    if (cut.position >= 0) {
        trace.eos_position = cut.position;
    }
    return {std::move(state), std::move(trace)};
}

DecodeResult decode_spatial_only(EngineConfig config, const Denoiser & denoiser,
                                 const std::vector<TokenId> & prompt) {
    config.mode = EngineMode::spatial_only;
    return decode(config, denoiser, prompt);
}

std::vector<TokenId> generated_output(const DecodeTrace & trace) {
    const auto begin = static_cast<size_t>(trace.prompt_len);
    std::vector<TokenId> out;
    for (size_t i = begin; i < trace.final_tokens.size(); ++i) {
        out.push_back(trace.final_tokens[i]);
        if (trace.final_tokens[i] == trace.eos_id) break;
    }
    return out;
}

}  // namespace psd
