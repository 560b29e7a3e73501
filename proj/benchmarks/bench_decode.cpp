#include "psd/count_model.hpp"
#include "psd/corpus.hpp"
#include "psd/engine.hpp"
#include "psd/frontier_oracle.hpp"

#include "support/helpers.hpp"

#include <benchmark/benchmark.h>

using namespace psd;

namespace {

EngineConfig bench_config(EngineMode mode, int32_t depth) {
    EngineConfig cfg;
    cfg.mode = mode;
    cfg.policy.kind = PolicyKind::confidence;
    cfg.policy.tau = 0.9;
    cfg.topology.depth = depth;
    cfg.block_len = 32;
    cfg.max_new_tokens = 256;
    cfg.eos_stop = false;
    return cfg;
}

FrontierOracle bench_oracle() {
    const Vocabulary vocab = test::synthetic_vocab(64);
    FrontierOracleConfig cfg;
    cfg.reference = test::make_reference(vocab, 300, 280, 13);
    cfg.decay = 0.03;
    cfg.noise_scale = 0.02;
    cfg.correctness = 0.95;
    cfg.seed = 13;
    return FrontierOracle(cfg, vocab);
}

void BM_decode_frontier(benchmark::State & state) {
    const FrontierOracle oracle = bench_oracle();
    const auto mode = state.range(0) == 0 ? EngineMode::spatial_only : EngineMode::psd;
    const auto depth = static_cast<int32_t>(state.range(1));
    const EngineConfig cfg = bench_config(mode, depth);
    int64_t tokens = 0;
    int64_t passes = 0;
    for (auto _ : state) {
        const DecodeResult res = decode(cfg, oracle, {1, 2, 3, 4});
        tokens += res.trace.total_committed();
        passes += res.trace.total_forward_passes();
        benchmark::DoNotOptimize(res.final_state.tokens.data());
    }
    state.counters["tokens_per_pass"] =
        benchmark::Counter(static_cast<double>(tokens) / static_cast<double>(passes));
    state.SetItemsProcessed(tokens);
}
BENCHMARK(BM_decode_frontier)
    ->ArgsProduct({{0, 1}, {0, 1, 3, 7}})
    ->ArgNames({"psd", "d"})
    ->Unit(benchmark::kMicrosecond);

void BM_decode_count_model(benchmark::State & state) {
    const Corpus corpus =
        build_corpus(test::tiny_corpus_lines(), {Tokenization::char_level, 1}, "embedded");
    const CountModel model =
        train_count_model({1, 0.5, 0.4, 0.4, 0.2, 0}, corpus.documents, corpus.vocab);
    const auto pairs = make_eval_suite(corpus, 1, 8, 99);
    EngineConfig cfg = bench_config(EngineMode::psd, static_cast<int32_t>(state.range(0)));
    cfg.block_len = 16;
    cfg.max_new_tokens = 64;
    int64_t tokens = 0;
    for (auto _ : state) {
        const DecodeResult res = decode(cfg, model, pairs[0].prompt);
        tokens += res.trace.total_committed();
        benchmark::DoNotOptimize(res.final_state.tokens.data());
    }
    state.SetItemsProcessed(tokens);
}
BENCHMARK(BM_decode_count_model)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
