#include "psd/draft_graph.hpp"

#include "psd/trace.hpp"
#include "support/helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace psd;

namespace {

std::set<std::vector<uint32_t>> node_sets(const DraftGraph & g) {
    std::set<std::vector<uint32_t>> out;
    for (const DraftNode & n : g.nodes) out.insert(n.ranks);
    return out;
}

// independent evaluator: expected deepest accepted size under independent
// rank acceptance, by direct enumeration over pass sets
double brute_expected_tokens(const std::set<std::vector<uint32_t>> & sets,
                             const std::vector<double> & p) {
    uint32_t max_rank = 0;
    for (const auto & s : sets) {
        if (!s.empty()) max_rank = std::max(max_rank, s.back());
    }
    double total = 0.0;
    for (uint32_t w = 0; w < (1u << max_rank); ++w) {
        double prob = 1.0;
        for (uint32_t j = 1; j <= max_rank; ++j) {
            const double pj = j <= p.size() ? p[j - 1] : 0.0;
            prob *= (w & (1u << (j - 1))) != 0 ? pj : 1.0 - pj;
        }
        size_t best = 0;
        for (const auto & s : sets) {
            bool inside = true;
            for (uint32_t r : s) inside = inside && (w & (1u << (r - 1))) != 0;
            if (inside) best = std::max(best, s.size());
        }
        total += prob * static_cast<double>(best);
    }
    return total;
}

DecodeTrace chain_probe_trace(int32_t depth, const std::vector<std::vector<bool>> & accept_plan) {
    DecodeTrace trace;
    trace.vocab_size = 10;
    trace.eos_id = 9;
    trace.topology.depth = depth;
    for (const auto & plan : accept_plan) {
        IterationRecord rec;
        rec.kstar = 0;
        rec.nodes.emplace_back(0, std::vector<uint32_t>{});
        rec.accepted.push_back(0);
        std::vector<uint32_t> prefix;
        for (int32_t j = 1; j <= depth; ++j) {
            prefix.push_back(static_cast<uint32_t>(j));
            rec.nodes.emplace_back(j, prefix);
            if (plan[static_cast<size_t>(j - 1)]) rec.accepted.push_back(j);
        }
        trace.iterations.push_back(rec);
    }
    return trace;
}

}  // namespace

TEST_CASE("speculative ordering sorts by confidence, leftmost on ties") {
    const Vocabulary vocab = test::synthetic_vocab(5);
    SequenceState st = make_initial_state({0}, 10, 10, vocab);
    CommitSet commits;
    for (Position p = 1; p < 11; ++p) {
        if (p == 4 || p == 6 || p == 9) continue;
        commits.add({p, 1, CommitSource::spatial, 0.9, 0});
    }
    st = apply_commits(st, vocab, commits);

    const DenoiserOutput cached =
        test::make_output({{4, 1, 0.6}, {6, 1, 0.8}, {9, 1, 0.6}});
    const SpeculativeOrdering sigma = speculative_ordering(st, vocab, cached);
    CHECK(sigma.positions == std::vector<Position>{6, 4, 9});
    CHECK(sigma.confidences == std::vector<double>{0.8, 0.6, 0.6});

    // singleton
    CommitSet more;
    more.add({4, 1, CommitSource::spatial, 0.9, 0});
    more.add({6, 1, CommitSource::spatial, 0.9, 0});
    const SequenceState one = apply_commits(st, vocab, more);
    CHECK(speculative_ordering(one, vocab, cached).positions == std::vector<Position>{9});
}

TEST_CASE("build_topology chains") {
    SUBCASE("d=1 b=0 is root plus one node") {
        const DraftGraph g = build_topology({1, 0, 64});
        REQUIRE(g.nodes.size() == 2);
        CHECK(g.nodes[1].ranks == std::vector<uint32_t>{1});
        REQUIRE(g.edges.size() == 1);
        CHECK(g.edges[0] == std::pair<int32_t, int32_t>{0, 1});
    }
    SUBCASE("d=3 b=0 is a 4-node chain") {
        const DraftGraph g = build_topology({3, 0, 64});
        REQUIRE(g.nodes.size() == 4);
        CHECK(g.nodes[3].ranks == std::vector<uint32_t>{1, 2, 3});
        CHECK(g.edges.size() == 3);
    }
    SUBCASE("d=0 is root only") {
        const DraftGraph g = build_topology({0, 0, 64});
        CHECK(g.nodes.size() == 1);
        CHECK(g.edges.empty());
    }
    SUBCASE("budget truncates breadth-first") {
        const DraftGraph g = build_topology({5, 0, 3});
        CHECK(g.nodes.size() == 3);  // root, {1}, {1,2}
    }
}

TEST_CASE("build_topology skip nodes carry multi-parent structure") {
    // d=2 b=1: enumerate and verify all edges satisfy strict inclusion, and
    // the {2} skip node connects root -> {2} -> {1,2}
    const DraftGraph g = build_topology({2, 1, 64});
    const auto sets = node_sets(g);
    CHECK(sets.count({2}) == 1);
    CHECK(sets.count({1, 2}) == 1);

    int32_t skip_id = -1, c2_id = -1;
    for (const DraftNode & n : g.nodes) {
        if (n.ranks == std::vector<uint32_t>{2}) skip_id = n.id;
        if (n.ranks == std::vector<uint32_t>{1, 2}) c2_id = n.id;
    }
    REQUIRE(skip_id >= 0);
    REQUIRE(c2_id >= 0);
    std::set<std::pair<int32_t, int32_t>> edges(g.edges.begin(), g.edges.end());
    CHECK(edges.count({0, skip_id}) == 1);
    CHECK(edges.count({skip_id, c2_id}) == 1);

    // brute-force check: every edge is a strict subset pair
    for (const auto & [p, k] : g.edges) {
        const auto & a = g.node(p).ranks;
        const auto & b = g.node(k).ranks;
        CHECK(a.size() < b.size());
        CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
    g.validate();
}

TEST_CASE("draft assembly realizes the node subsets over cached predictions") {
    const Vocabulary vocab = test::synthetic_vocab(6);
    const TokenId A = 0, B = 1, C = 2, D = 3;

    // x^(t+1) = [A, M, M, B]; prompt [A]; block covers positions 1..3
    SequenceState st;
    st.tokens = {A, vocab.mask_id, vocab.mask_id, B};
    st.prompt_len = 1;
    st.gen_len = 3;
    st.block_len = 3;

    const DenoiserOutput cached = test::make_output({{1, C, 0.9}, {2, D, 0.8}});
    const SpeculativeOrdering sigma = speculative_ordering(st, vocab, cached);
    REQUIRE(sigma.positions == std::vector<Position>{1, 2});

    const DraftGraph g = build_topology({2, 0, 64});
    const DraftSet drafts = assemble_drafts(st, sigma, cached, g);
    REQUIRE(drafts.drafts.size() == 3);

    // root reproduces the post-spatial state exactly
    CHECK(drafts.drafts[0].tokens == st.tokens);
    // node {1} fills sigma rank 1 (position 1) with C
    CHECK(drafts.drafts[1].tokens == std::vector<TokenId>{A, C, vocab.mask_id, B});
    CHECK(drafts.drafts[1].filled == std::vector<Position>{1});
    // node {1,2}
    CHECK(drafts.drafts[2].tokens == std::vector<TokenId>{A, C, D, B});
}

TEST_CASE("ranks beyond m are dropped and collapsed nodes deduplicate") {
    const Vocabulary vocab = test::synthetic_vocab(6);
    SequenceState st = make_initial_state({0}, 4, 4, vocab);
    CommitSet cs;
    for (Position p = 1; p < 4; ++p) cs.add({p, 1, CommitSource::spatial, 0.9, 0});
    st = apply_commits(st, vocab, cs);  // one mask left -> m = 1

    const DenoiserOutput cached = test::make_output({{4, 2, 0.7}});
    const SpeculativeOrdering sigma = speculative_ordering(st, vocab, cached);
    const DraftGraph g = build_topology({3, 0, 64});
    const DraftSet drafts = assemble_drafts(st, sigma, cached, g);
    REQUIRE(drafts.drafts.size() == 2);  // root and {1}; deeper chain nodes collapse
    CHECK(drafts.drafts[1].ranks == std::vector<uint32_t>{1});
    // the surviving edge set connects root to the collapsed representative
    REQUIRE(drafts.edges.size() == 1);
    CHECK(drafts.edges[0] == std::pair<int32_t, int32_t>{0, 1});
}

TEST_CASE("assembled drafts differ from the base state exactly at their fills") {
    const Vocabulary vocab = test::synthetic_vocab(9);
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const Position gen = 6 + static_cast<Position>(rng() % 8);
        SequenceState st = make_initial_state({0, 1}, gen, gen, vocab);
        CommitSet cs;
        for (Position p = 2; p < st.length(); ++p) {
            if (rng() % 3 == 0) {
                cs.add({p, static_cast<TokenId>(rng() % vocab.size), CommitSource::spatial, 0.5,
                        0});
            }
        }
        st = apply_commits(st, vocab, cs);
        const auto masked = masked_positions(st, vocab, Scope::active_block);
        if (masked.empty()) continue;
        std::vector<Prediction> preds;
        for (Position p : masked) {
            preds.push_back({p, static_cast<TokenId>(rng() % (vocab.size - 1)),
                             0.1 + 0.8 * std::uniform_real_distribution<>(0, 1)(rng)});
        }
        const DenoiserOutput cached = test::make_output(preds);
        const SpeculativeOrdering sigma = speculative_ordering(st, vocab, cached);
        const TopologyConfig topo{static_cast<int32_t>(1 + rng() % 5),
                                  static_cast<int32_t>(rng() % 3),
                                  static_cast<int32_t>(2 + rng() % 8)};
        const DraftSet drafts = assemble_drafts(st, sigma, cached, build_topology(topo));

        std::set<std::vector<uint32_t>> seen;
        for (const DraftSequence & d : drafts.drafts) {
            CHECK(seen.insert(d.ranks).second);  // pairwise distinct effective subsets
            std::set<Position> fill(d.filled.begin(), d.filled.end());
            for (Position p = 0; p < st.length(); ++p) {
                if (fill.count(p) != 0) {
                    CHECK(d.tokens[static_cast<size_t>(p)] == cached.at(p).token);
                    CHECK(st.tokens[static_cast<size_t>(p)] == vocab.mask_id);
                } else {
                    CHECK(d.tokens[static_cast<size_t>(p)] == st.tokens[static_cast<size_t>(p)]);
                }
            }
        }
    }
}

TEST_CASE("chain assembly is order-invariant") {
    const Vocabulary vocab = test::synthetic_vocab(7);
    SequenceState st = make_initial_state({0}, 6, 6, vocab);
    const auto masked = masked_positions(st, vocab, Scope::active_block);
    std::vector<Prediction> preds;
    double conf = 0.9;
    for (Position p : masked) {
        preds.push_back({p, static_cast<TokenId>((p * 2) % (vocab.size - 1)), conf});
        conf -= 0.05;
    }
    const DenoiserOutput cached = test::make_output(preds);
    const SpeculativeOrdering sigma = speculative_ordering(st, vocab, cached);

    const DraftSet two = assemble_drafts(st, sigma, cached, build_topology({2, 0, 64}));
    const DraftSet one = assemble_drafts(st, sigma, cached, build_topology({1, 0, 64}));

    // assembling {1,2} directly equals assembling {1} and overlaying rank 2
    std::vector<TokenId> overlay = one.drafts[1].tokens;
    overlay[static_cast<size_t>(sigma.positions[1])] = cached.at(sigma.positions[1]).token;
    CHECK(two.drafts[2].tokens == overlay);
}

TEST_CASE("rank acceptance estimation from chain probes") {
    // 10 iterations offering ranks 1..3; acceptance pattern gives 0.9/0.5/0.1
    std::vector<std::vector<bool>> plan;
    for (int i = 0; i < 10; ++i) {
        plan.push_back({i < 9, i < 5, i < 1});
    }
    const DecodeTrace trace = chain_probe_trace(3, plan);
    const auto est = estimate_rank_acceptance({trace});
    REQUIRE(est.size() == 3);
    CHECK(est[0].p_hat() == doctest::Approx(0.9));
    CHECK(est[1].p_hat() == doctest::Approx(0.5));
    CHECK(est[2].p_hat() == doctest::Approx(0.1));
}

TEST_CASE("calibration extremes") {
    SUBCASE("certain acceptance favors the pure chain") {
        std::vector<std::vector<bool>> plan(4, {true, true, true});
        const DecodeTrace trace = chain_probe_trace(3, plan);
        const DraftGraph g = calibrate_topology({trace}, 4);
        CHECK(node_sets(g) ==
              std::set<std::vector<uint32_t>>{{}, {1}, {1, 2}, {1, 2, 3}});
    }
    SUBCASE("hopeless acceptance yields the root-only graph") {
        std::vector<std::vector<bool>> plan(4, {false, false, false});
        const DecodeTrace trace = chain_probe_trace(3, plan);
        const DraftGraph g = calibrate_topology({trace}, 4);
        CHECK(g.nodes.size() == 1);
    }
    SUBCASE("empty trace list is an error") {
        CHECK_THROWS_AS(calibrate_topology({}, 4), std::invalid_argument);
    }
}

TEST_CASE("calibration at p=(0.9,0.5,0.1), K_max=3 matches exhaustive search") {
    std::vector<std::vector<bool>> plan;
    for (int i = 0; i < 10; ++i) {
        plan.push_back({i < 9, i < 5, i < 1});
    }
    const DecodeTrace trace = chain_probe_trace(3, plan);
    const std::vector<double> p = {0.9, 0.5, 0.1};

    // exhaustive oracle over every candidate pair from the chain+skip family
    const std::vector<std::vector<uint32_t>> family = {{1},    {2},    {3},   {1, 2},
                                                       {1, 3}, {1, 2, 3}};
    double best_value = 0.0;
    std::set<std::vector<uint32_t>> best_sets;
    for (size_t a = 0; a < family.size(); ++a) {
        for (size_t b = a + 1; b < family.size(); ++b) {
            std::set<std::vector<uint32_t>> sets = {{}, family[a], family[b]};
            const double value = brute_expected_tokens(sets, p);
            if (value > best_value + 1e-12) {
                best_value = value;
                best_sets = sets;
            }
        }
    }
    CHECK(best_sets == std::set<std::vector<uint32_t>>{{}, {1}, {1, 2}});
    CHECK(best_value == doctest::Approx(1.35));

    const DraftGraph g = calibrate_topology({trace}, 3);
    CHECK(node_sets(g) == best_sets);
    CHECK(expected_accepted_tokens(g, p) == doctest::Approx(best_value));
}

TEST_CASE("draft graph text artifact round-trips") {
    const DraftGraph g = build_topology({3, 1, 64});
    const std::string path = "/tmp/psd_test_graph.txt";
    save_draft_graph(g, path);
    const DraftGraph loaded = load_draft_graph(path);
    REQUIRE(loaded.nodes.size() == g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(loaded.nodes[i].ranks == g.nodes[i].ranks);
    }
    CHECK(loaded.edges == g.edges);
}
