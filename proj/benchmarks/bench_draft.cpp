#include "psd/draft_graph.hpp"
#include "psd/engine.hpp"
#include "psd/hashing.hpp"

#include "support/helpers.hpp"

#include <benchmark/benchmark.h>

using namespace psd;

namespace {

struct DraftFixture {
    Vocabulary vocab = test::synthetic_vocab(64);
    SequenceState state;
    DenoiserOutput cached;
    SpeculativeOrdering sigma;
    DraftGraph graph;

    explicit DraftFixture(int32_t depth, int32_t branch) {
        state = make_initial_state({1, 2, 3, 4}, 32, 32, vocab);
        std::vector<Prediction> preds;
        for (Position p : masked_positions(state, vocab, Scope::active_block)) {
            const uint64_t h = hash_words({11, static_cast<uint64_t>(p)});
            preds.push_back({p, static_cast<TokenId>(h % 63),
                             quantize_confidence(0.3 + 0.65 * hash_u01(h))});
        }
        cached.predictions = preds;
        sigma = speculative_ordering(state, vocab, cached);
        graph = build_topology({depth, branch, 64});
    }
};

void BM_assemble_drafts(benchmark::State & state) {
    const DraftFixture fx(static_cast<int32_t>(state.range(0)),
                          static_cast<int32_t>(state.range(1)));
    for (auto _ : state) {
        const DraftSet drafts = assemble_drafts(fx.state, fx.sigma, fx.cached, fx.graph);
        benchmark::DoNotOptimize(drafts.drafts.data());
    }
}
BENCHMARK(BM_assemble_drafts)
    ->Args({3, 0})
    ->Args({7, 0})
    ->Args({7, 2})
    ->ArgNames({"d", "b"});

void BM_hierarchical_accept(benchmark::State & state) {
    const DraftFixture fx(static_cast<int32_t>(state.range(0)), 1);
    const DraftSet drafts = assemble_drafts(fx.state, fx.sigma, fx.cached, fx.graph);
    std::vector<DenoiserOutput> ver(drafts.drafts.size());
    for (size_t i = 0; i < drafts.drafts.size(); ++i) {
        std::vector<Prediction> preds;
        for (size_t r = 0; r < fx.sigma.m(); ++r) {
            const Position pos = fx.sigma.positions[r];
            if (std::binary_search(drafts.drafts[i].filled.begin(),
                                   drafts.drafts[i].filled.end(), pos)) {
                continue;
            }
            preds.push_back({pos, fx.cached.at(pos).token, quantize_confidence(0.95)});
        }
        ver[i].predictions = std::move(preds);
    }
    PolicyConfig policy;
    policy.kind = PolicyKind::confidence;
    for (auto _ : state) {
        const AcceptanceOutcome out =
            hierarchical_accept(drafts, ver, fx.sigma, fx.cached, policy);
        benchmark::DoNotOptimize(out.deepest);
    }
}
BENCHMARK(BM_hierarchical_accept)->Arg(3)->Arg(7)->ArgNames({"d"});

void BM_calibration_value(benchmark::State & state) {
    const DraftGraph graph = build_topology({static_cast<int32_t>(state.range(0)), 1, 64});
    std::vector<double> p;
    for (int32_t j = 0; j < state.range(0); ++j) p.push_back(0.9 - 0.08 * j);
    for (auto _ : state) {
        benchmark::DoNotOptimize(expected_accepted_tokens(graph, p));
    }
}
BENCHMARK(BM_calibration_value)->Arg(5)->Arg(8)->ArgNames({"d"});

}  // namespace
