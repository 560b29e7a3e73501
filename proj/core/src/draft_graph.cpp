#include "psd/draft_graph.hpp"

#include "psd/trace.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace psd {

namespace {

bool strict_subset(const std::vector<uint32_t> & a, const std::vector<uint32_t> & b) {
    if (a.size() >= b.size()) return false;
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool subset_lex_less(const std::vector<uint32_t> & a, const std::vector<uint32_t> & b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

}  // namespace

void DraftGraph::validate() const {
    if (nodes.empty() || !nodes.front().ranks.empty()) {
        throw std::invalid_argument("draft graph: first node must be the empty root");
    }
    for (size_t i = 0; i < nodes.size(); ++i) {
        const DraftNode & n = nodes[i];
        if (n.id != static_cast<int32_t>(i)) {
            throw std::invalid_argument("draft graph: node ids must be positional");
        }
        if (!std::is_sorted(n.ranks.begin(), n.ranks.end()) ||
            std::adjacent_find(n.ranks.begin(), n.ranks.end()) != n.ranks.end()) {
            throw std::invalid_argument("draft graph: node ranks must be sorted and unique");
        }
        if (!n.ranks.empty() && n.ranks.front() < 1) {
            throw std::invalid_argument("draft graph: ranks are 1-based");
        }
        if (i > 0 && nodes[i - 1].ranks.size() > n.ranks.size()) {
            throw std::invalid_argument("draft graph: nodes must be ordered by subset size");
        }
    }
    std::vector<bool> has_parent(nodes.size(), false);
    for (const auto & [p, k] : edges) {
        if (p < 0 || k < 0 || p >= node_count() || k >= node_count()) {
            throw std::invalid_argument("draft graph: edge endpoint out of range");
        }
        if (!strict_subset(node(p).ranks, node(k).ranks)) {
            throw std::invalid_argument("draft graph: edge violates strict subset inclusion");
        }
        has_parent[static_cast<size_t>(k)] = true;
    }
    for (size_t i = 1; i < nodes.size(); ++i) {
        if (!has_parent[i]) {
            throw std::invalid_argument("draft graph: non-root node without a parent");
        }
    }
    // acyclicity follows from strict inclusion: every edge increases |ranks|
}

void TopologyConfig::validate() const {
    if (depth < 0) throw std::invalid_argument("topology: depth must be >= 0");
    if (branch < 0) throw std::invalid_argument("topology: branch must be >= 0");
    if (budget < 1) throw std::invalid_argument("topology: budget must be >= 1 (the root)");
}

DraftGraph build_topology(const TopologyConfig & cfg) {
    cfg.validate();

    struct Candidate {
        std::vector<uint32_t> ranks;
        int chain_j  = -1;  // C_j, or -1 for skips
        int parent_j = 0;   // chain index this node hangs off (C_{j-1})
        int out_j    = -1;  // chain index a skip node feeds into, if any
    };
    std::vector<Candidate> all;
    all.push_back({{}, 0, -1, -1});  // root = C_0
    for (int32_t j = 1; j <= cfg.depth; ++j) {
        std::vector<uint32_t> chain;
        for (int32_t r = 1; r <= j; ++r) chain.push_back(static_cast<uint32_t>(r));
        all.push_back({chain, j, j - 1, -1});
        for (int32_t q = 1; q <= cfg.branch && j + q <= cfg.depth; ++q) {
            std::vector<uint32_t> skip;
            for (int32_t r = 1; r < j; ++r) skip.push_back(static_cast<uint32_t>(r));
            skip.push_back(static_cast<uint32_t>(j + q));
            all.push_back({std::move(skip), -1, j - 1, j + q});
        }
    }
    if (static_cast<int32_t>(all.size()) > cfg.budget) {
        all.resize(static_cast<size_t>(cfg.budget));
    }

    DraftGraph g;
    std::map<int, int32_t> chain_id;  // chain index -> node id
    for (size_t i = 0; i < all.size(); ++i) {
        g.nodes.push_back({static_cast<int32_t>(i), all[i].ranks});
        if (all[i].chain_j >= 0) chain_id[all[i].chain_j] = static_cast<int32_t>(i);
    }
    for (size_t i = 1; i < all.size(); ++i) {
        const Candidate & c = all[i];
        auto pit = chain_id.find(c.parent_j);
        if (pit != chain_id.end()) {
            g.edges.emplace_back(pit->second, static_cast<int32_t>(i));
        }
        if (c.out_j >= 0) {
            auto oit = chain_id.find(c.out_j);
            if (oit != chain_id.end()) {
                g.edges.emplace_back(static_cast<int32_t>(i), oit->second);
            }
        }
    }
    g.validate();
    return g;
}

SpeculativeOrdering speculative_ordering(const SequenceState & post_state,
                                         const Vocabulary & vocab,
                                         const DenoiserOutput & cached) {
    const std::vector<Position> masked = masked_positions(post_state, vocab, Scope::active_block);
    std::vector<std::pair<double, Position>> order;
    order.reserve(masked.size());
    for (Position p : masked) {
        order.emplace_back(cached.at(p).confidence, p);
    }
    std::sort(order.begin(), order.end(), [](const auto & a, const auto & b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // leftmost first on ties
    });
    SpeculativeOrdering sigma;
    sigma.positions.reserve(order.size());
    sigma.confidences.reserve(order.size());
    for (const auto & [c, p] : order) {
        sigma.positions.push_back(p);
        sigma.confidences.push_back(c);
    }
    return sigma;
}

DraftSet assemble_drafts(const SequenceState & post_state, const SpeculativeOrdering & sigma,
                         const DenoiserOutput & cached, const DraftGraph & graph) {
    const auto m = static_cast<uint32_t>(sigma.m());
    DraftSet set;
    std::map<std::vector<uint32_t>, int32_t> seen;        // effective subset -> draft index
    std::vector<int32_t> rep(graph.nodes.size(), -1);     // graph node -> draft index

    for (const DraftNode & node : graph.nodes) {
        std::vector<uint32_t> eff;
        for (uint32_t r : node.ranks) {
            if (r <= m) eff.push_back(r);  // end-of-block shrinkage is routine
        }
        auto it = seen.find(eff);
        if (it != seen.end()) {
            rep[static_cast<size_t>(node.id)] = it->second;
            continue;
        }
        DraftSequence d;
        d.node_id = node.id;
        d.ranks = eff;
        d.tokens = post_state.tokens;
        for (uint32_t r : eff) {
            const Position pos = sigma.positions[r - 1];
            d.tokens[static_cast<size_t>(pos)] = cached.at(pos).token;
            d.filled.push_back(pos);
        }
        std::sort(d.filled.begin(), d.filled.end());
        const auto idx = static_cast<int32_t>(set.drafts.size());
        seen.emplace(std::move(eff), idx);
        rep[static_cast<size_t>(node.id)] = idx;
        set.drafts.push_back(std::move(d));
    }

    std::set<std::pair<int32_t, int32_t>> edges;
    for (const auto & [p, k] : graph.edges) {
        const int32_t rp = rep[static_cast<size_t>(p)];
        const int32_t rk = rep[static_cast<size_t>(k)];
        if (rp != rk) edges.emplace(rp, rk);
    }
    set.edges.assign(edges.begin(), edges.end());
    return set;
}

std::vector<RankEstimate> estimate_rank_acceptance(const std::vector<DecodeTrace> & traces) {
    std::vector<RankEstimate> est;
    for (const DecodeTrace & tr : traces) {
        for (const IterationRecord & rec : tr.iterations) {
            if (rec.nodes.empty()) continue;
            std::set<int32_t> accepted(rec.accepted.begin(), rec.accepted.end());
            for (const auto & [id, ranks] : rec.nodes) {
                // chain prefixes {1..j} are the probe's per-rank observations
                bool is_prefix = true;
                for (size_t i = 0; i < ranks.size(); ++i) {
                    if (ranks[i] != static_cast<uint32_t>(i + 1)) { is_prefix = false; break; }
                }
                if (!is_prefix || ranks.empty()) continue;
                const size_t j = ranks.size();
                if (est.size() < j) est.resize(j);
                est[j - 1].offered += 1;
                if (accepted.count(id) != 0) est[j - 1].accepted += 1;
            }
        }
    }
    return est;
}

double expected_accepted_tokens(const DraftGraph & graph, const std::vector<double> & p_rank) {
    uint32_t max_rank = 0;
    for (const DraftNode & n : graph.nodes) {
        if (!n.ranks.empty()) max_rank = std::max(max_rank, n.ranks.back());
    }
    if (max_rank > 24) {
        throw std::invalid_argument("expected_accepted_tokens: rank range too large to enumerate");
    }
    std::vector<uint32_t> node_mask;
    node_mask.reserve(graph.nodes.size());
    for (const DraftNode & n : graph.nodes) {
        uint32_t mask = 0;
        for (uint32_t r : n.ranks) mask |= 1u << (r - 1);
        node_mask.push_back(mask);
    }
    auto p_of = [&](uint32_t j) {  // 1-based rank
        return j <= p_rank.size() ? p_rank[j - 1] : 0.0;
    };
    double expectation = 0.0;
    for (uint32_t w = 0; w < (1u << max_rank); ++w) {
        double prob = 1.0;
        for (uint32_t j = 1; j <= max_rank; ++j) {
            prob *= (w & (1u << (j - 1))) != 0 ? p_of(j) : 1.0 - p_of(j);
        }
        if (prob == 0.0) continue;
        size_t best = 0;
        for (size_t i = 0; i < graph.nodes.size(); ++i) {
            if ((node_mask[i] & ~w) == 0) best = std::max(best, graph.nodes[i].ranks.size());
        }
        expectation += prob * static_cast<double>(best);
    }
    return expectation;
}

namespace {

DraftGraph graph_from_subsets(std::vector<std::vector<uint32_t>> subsets) {
    std::sort(subsets.begin(), subsets.end(), subset_lex_less);
    DraftGraph g;
    for (size_t i = 0; i < subsets.size(); ++i) {
        g.nodes.push_back({static_cast<int32_t>(i), subsets[i]});
    }
    for (size_t p = 0; p < subsets.size(); ++p) {
        for (size_t k = 0; k < subsets.size(); ++k) {
            if (p != k && strict_subset(subsets[p], subsets[k])) {
                g.edges.emplace_back(static_cast<int32_t>(p), static_cast<int32_t>(k));
            }
        }
    }
    g.validate();
    return g;
}

}  // namespace

DraftGraph calibrate_topology(const std::vector<DecodeTrace> & traces, int32_t k_max,
                              std::vector<RankEstimate> * stats_out) {
    if (traces.empty()) {
        throw std::invalid_argument("calibrate_topology: no traces");
    }
    if (k_max < 1) {
        throw std::invalid_argument("calibrate_topology: k_max must be >= 1");
    }
    const std::vector<RankEstimate> est = estimate_rank_acceptance(traces);
    if (stats_out != nullptr) *stats_out = est;

    const auto d_max = static_cast<int32_t>(est.size());
    std::vector<double> p;
    p.reserve(est.size());
    for (const RankEstimate & e : est) p.push_back(e.p_hat());

    // candidate family: chain prefixes plus single-rank skips, capped at d_max
    std::vector<std::vector<uint32_t>> candidates;
    for (int32_t j = 1; j <= d_max; ++j) {
        std::vector<uint32_t> chain;
        for (int32_t r = 1; r <= j; ++r) chain.push_back(static_cast<uint32_t>(r));
        candidates.push_back(std::move(chain));
        for (int32_t q = 1; j + q <= d_max; ++q) {
            std::vector<uint32_t> skip;
            for (int32_t r = 1; r < j; ++r) skip.push_back(static_cast<uint32_t>(r));
            skip.push_back(static_cast<uint32_t>(j + q));
            candidates.push_back(std::move(skip));
        }
    }
    std::sort(candidates.begin(), candidates.end(), subset_lex_less);
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // a candidate attaches through the family's parent structure: both C_j and
    // the skips at depth j hang off the chain prefix {1..j-1}
    const auto parent_prefix = [](const std::vector<uint32_t> & s) {
        std::vector<uint32_t> prefix;
        for (uint32_t r = 1; r + 1 <= s.back(); ++r) {
            if (!std::binary_search(s.begin(), s.end(), r)) break;
            prefix.push_back(r);
        }
        return prefix;
    };

    std::vector<std::vector<uint32_t>> selected = {{}};
    std::vector<bool> used(candidates.size(), false);
    double current = 0.0;
    while (static_cast<int32_t>(selected.size()) < k_max) {
        int best = -1;
        double best_value = current;
        for (size_t c = 0; c < candidates.size(); ++c) {
            if (used[c]) continue;
            const std::vector<uint32_t> parent = parent_prefix(candidates[c]);
            if (std::find(selected.begin(), selected.end(), parent) == selected.end()) continue;
            std::vector<std::vector<uint32_t>> trial = selected;
            trial.push_back(candidates[c]);
            const double value = expected_accepted_tokens(graph_from_subsets(trial), p);
            if (value > best_value + 1e-12) {
                best_value = value;
                best = static_cast<int>(c);
            }
        }
        if (best < 0) break;  // nothing worth drafting
        used[static_cast<size_t>(best)] = true;
        selected.push_back(candidates[static_cast<size_t>(best)]);
        current = best_value;
    }
    return graph_from_subsets(selected);
}

void save_draft_graph(const DraftGraph & graph, const std::string & path) {
    graph.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("draft graph: cannot open for write: " + path);
    os << "psd-draft-graph v1\n";
    os << "nodes " << graph.nodes.size() << '\n';
    for (const DraftNode & n : graph.nodes) {
        os << "node " << n.id;
        if (n.ranks.empty()) {
            os << " -";
        } else {
            for (uint32_t r : n.ranks) os << ' ' << r;
        }
        os << '\n';
    }
    os << "edges " << graph.edges.size() << '\n';
    for (const auto & [p, k] : graph.edges) {
        os << "edge " << p << ' ' << k << '\n';
    }
    os << "end\n";
    if (!os) throw std::runtime_error("draft graph: write failed: " + path);
}

DraftGraph load_draft_graph(const std::string & path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("draft graph: cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "psd-draft-graph v1") {
        throw std::runtime_error("draft graph: expected header 'psd-draft-graph v1', got '" +
                                 line + "'");
    }
    DraftGraph g;
    size_t n_nodes = 0, n_edges = 0;
    if (!std::getline(is, line)) throw std::runtime_error("draft graph: truncated");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> n_nodes;
        if (tag != "nodes" || ss.fail()) throw std::runtime_error("draft graph: bad nodes line");
    }
    for (size_t i = 0; i < n_nodes; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("draft graph: truncated");
        std::istringstream ss(line);
        std::string tag;
        int32_t id;
        ss >> tag >> id;
        if (tag != "node" || ss.fail() || id != static_cast<int32_t>(i)) {
            throw std::runtime_error("draft graph: bad node line");
        }
        DraftNode node{id, {}};
        std::string field;
        while (ss >> field) {
            if (field == "-") break;
            node.ranks.push_back(static_cast<uint32_t>(std::stoul(field)));
        }
        g.nodes.push_back(std::move(node));
    }
    if (!std::getline(is, line)) throw std::runtime_error("draft graph: truncated");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> n_edges;
        if (tag != "edges" || ss.fail()) throw std::runtime_error("draft graph: bad edges line");
    }
    for (size_t i = 0; i < n_edges; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("draft graph: truncated");
        std::istringstream ss(line);
        std::string tag;
        int32_t p, k;
        ss >> tag >> p >> k;
        if (tag != "edge" || ss.fail()) throw std::runtime_error("draft graph: bad edge line");
        g.edges.emplace_back(p, k);
    }
    g.validate();
    return g;
}

}  // namespace psd
