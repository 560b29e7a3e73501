#include "psd/trace.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace psd {

using ordered_json = nlohmann::ordered_json;

EngineMode parse_engine_mode(const std::string & s) {
    if (s == "psd") return EngineMode::psd;
    if (s == "spatial_only") return EngineMode::spatial_only;
    if (s == "greedy_only") return EngineMode::greedy_only;
    throw std::invalid_argument("unknown engine mode: '" + s + "'");
}

const char * to_string(EngineMode m) {
    switch (m) {
        case EngineMode::psd:          return "psd";
        case EngineMode::spatial_only: return "spatial_only";
        case EngineMode::greedy_only:  return "greedy_only";
    }
    return "?";
}

int64_t DecodeTrace::total_forward_passes() const {
    int64_t n = 0;
    for (const IterationRecord & r : iterations) n += r.forward_passes;
    return n;
}

int64_t DecodeTrace::total_committed() const {
    int64_t n = 0;
    for (const IterationRecord & r : iterations) n += r.committed_count();
    return n;
}

EosCutoff eos_cutoff(const DecodeTrace & trace) {
    EosCutoff cut;
    for (size_t t = 0; t < trace.iterations.size(); ++t) {
        const IterationRecord & rec = trace.iterations[t];
        for (const CommitSet * cs : {&rec.spatial, &rec.speculative, &rec.verifier}) {
            for (const Commit & c : cs->entries) {
                if (c.token == trace.eos_id && (cut.position < 0 || c.pos < cut.position)) {
                    cut.position = c.pos;
                    cut.iteration = static_cast<int64_t>(t);
                }
            }
        }
    }
    return cut;
}

std::string format_confidence(double c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9f", c);
    return buf;
}

namespace {

ordered_json commit_to_json(const Commit & c, bool with_rank) {
    ordered_json j = ordered_json::array();
    j.push_back(c.pos);
    j.push_back(c.token);
    if (with_rank) j.push_back(c.rank);
    j.push_back(format_confidence(c.confidence));
    return j;
}

Commit commit_from_json(const nlohmann::json & j, CommitSource source, bool with_rank) {
    Commit c;
    c.pos = j.at(0).get<Position>();
    c.token = j.at(1).get<TokenId>();
    c.source = source;
    size_t k = 2;
    if (with_rank) c.rank = j.at(k++).get<int32_t>();
    c.confidence = std::strtod(j.at(k).get<std::string>().c_str(), nullptr);
    return c;
}

ordered_json preds_to_json(const std::vector<Prediction> & preds) {
    ordered_json arr = ordered_json::array();
    for (const Prediction & p : preds) {
        arr.push_back(ordered_json::array({p.pos, p.token, format_confidence(p.confidence)}));
    }
    return arr;
}

std::vector<Prediction> preds_from_json(const nlohmann::json & arr) {
    std::vector<Prediction> out;
    out.reserve(arr.size());
    for (const auto & e : arr) {
        Prediction p;
        p.pos = e.at(0).get<Position>();
        p.token = e.at(1).get<TokenId>();
        p.confidence = std::strtod(e.at(2).get<std::string>().c_str(), nullptr);
        out.push_back(p);
    }
    return out;
}

}  // namespace

void write_trace_jsonl(const DecodeTrace & trace, const std::string & path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("trace: cannot open for write: " + path);

    ordered_json header;
    header["type"] = "header";
    header["version"] = trace.version;
    header["prompt_len"] = trace.prompt_len;
    header["block_len"] = trace.block_len;
    header["max_new_tokens"] = trace.max_new_tokens;
    header["mode"] = to_string(trace.mode);
    header["policy"] = {{"kind", to_string(trace.policy.kind)},
                        {"tau", format_confidence(trace.policy.tau)},
                        {"anchor_tau", format_confidence(trace.policy.anchor_tau)},
                        {"window", trace.policy.window_w},
                        {"fallback", to_string(trace.policy.fallback)}};
    header["topology"] = {{"depth", trace.topology.depth},
                          {"branch", trace.topology.branch},
                          {"budget", trace.topology.budget}};
    header["eos_stop"] = trace.eos_stop;
    header["seed"] = trace.seed;
    header["vocab_size"] = trace.vocab_size;
    header["eos_id"] = trace.eos_id;
    os << header.dump() << '\n';

    for (const IterationRecord & rec : trace.iterations) {
        ordered_json j;
        j["type"] = "iter";
        j["step"] = rec.step;
        j["block"] = rec.block;
        j["fp"] = rec.forward_passes;
        j["batch"] = rec.batch_size;
        j["preds"] = preds_to_json(rec.preds);
        ordered_json spatial = ordered_json::array();
        for (const Commit & c : rec.spatial.entries) spatial.push_back(commit_to_json(c, false));
        j["spatial"] = spatial;
        ordered_json sigma = ordered_json::array();
        for (const auto & [pos, conf] : rec.sigma) {
            sigma.push_back(ordered_json::array({pos, format_confidence(conf)}));
        }
        j["sigma"] = sigma;
        ordered_json nodes = ordered_json::array();
        for (const auto & [id, ranks] : rec.nodes) {
            nodes.push_back(ordered_json::array({id, ranks}));
        }
        j["nodes"] = nodes;
        j["edges"] = rec.edges;
        ordered_json ver = ordered_json::array();
        for (const auto & [id, preds] : rec.node_ver) {
            ver.push_back(ordered_json::array({id, preds_to_json(preds)}));
        }
        j["ver"] = ver;
        j["accepted"] = rec.accepted;
        j["kstar"] = rec.kstar;
        ordered_json spec = ordered_json::array();
        for (const Commit & c : rec.speculative.entries) spec.push_back(commit_to_json(c, true));
        j["spec"] = spec;
        ordered_json verifier = ordered_json::array();
        for (const Commit & c : rec.verifier.entries) verifier.push_back(commit_to_json(c, false));
        j["verifier"] = verifier;
        os << j.dump() << '\n';
    }

    ordered_json end;
    end["type"] = "end";
    end["forward_passes"] = trace.total_forward_passes();
    if (trace.eos_position.has_value()) {
        end["eos_position"] = *trace.eos_position;
    } else {
        end["eos_position"] = nullptr;
    }
    end["tokens"] = trace.final_tokens;
    os << end.dump() << '\n';
    if (!os) throw std::runtime_error("trace: write failed: " + path);
}

DecodeTrace read_trace_jsonl(const std::string & path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("trace: cannot open: " + path);

    DecodeTrace trace;
    std::string line;
    bool saw_header = false;
    bool saw_end = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "header") {
            const auto version = j.at("version").get<int32_t>();
            if (version != kTraceSchemaVersion) {
                throw std::runtime_error("trace: schema version " + std::to_string(version) +
                                         " unsupported, reader expects version " +
                                         std::to_string(kTraceSchemaVersion));
            }
            trace.version = version;
            trace.prompt_len = j.at("prompt_len").get<Position>();
            trace.block_len = j.at("block_len").get<Position>();
            trace.max_new_tokens = j.at("max_new_tokens").get<Position>();
            trace.mode = parse_engine_mode(j.at("mode").get<std::string>());
            const auto & pol = j.at("policy");
            trace.policy.kind = parse_policy_kind(pol.at("kind").get<std::string>());
            trace.policy.tau = std::strtod(pol.at("tau").get<std::string>().c_str(), nullptr);
            trace.policy.anchor_tau =
                std::strtod(pol.at("anchor_tau").get<std::string>().c_str(), nullptr);
            trace.policy.window_w = pol.at("window").get<int32_t>();
            trace.policy.fallback = parse_fallback_mode(pol.at("fallback").get<std::string>());
            const auto & topo = j.at("topology");
            trace.topology.depth = topo.at("depth").get<int32_t>();
            trace.topology.branch = topo.at("branch").get<int32_t>();
            trace.topology.budget = topo.at("budget").get<int32_t>();
            trace.eos_stop = j.at("eos_stop").get<bool>();
            trace.seed = j.at("seed").get<uint64_t>();
            trace.vocab_size = j.at("vocab_size").get<TokenId>();
            trace.eos_id = j.at("eos_id").get<TokenId>();
            saw_header = true;
        } else if (type == "iter") {
            if (!saw_header) throw std::runtime_error("trace: iteration before header");
            IterationRecord rec;
            rec.step = j.at("step").get<int32_t>();
            rec.block = j.at("block").get<int32_t>();
            rec.forward_passes = j.at("fp").get<int32_t>();
            rec.batch_size = j.at("batch").get<int32_t>();
            rec.preds = preds_from_json(j.at("preds"));
            for (const auto & e : j.at("spatial")) {
                rec.spatial.add(commit_from_json(e, CommitSource::spatial, false));
            }
            for (const auto & e : j.at("sigma")) {
                rec.sigma.emplace_back(
                    e.at(0).get<Position>(),
                    std::strtod(e.at(1).get<std::string>().c_str(), nullptr));
            }
            for (const auto & e : j.at("nodes")) {
                rec.nodes.emplace_back(e.at(0).get<int32_t>(),
                                       e.at(1).get<std::vector<uint32_t>>());
            }
            for (const auto & e : j.at("edges")) {
                rec.edges.emplace_back(e.at(0).get<int32_t>(), e.at(1).get<int32_t>());
            }
            for (const auto & e : j.at("ver")) {
                rec.node_ver.emplace_back(e.at(0).get<int32_t>(), preds_from_json(e.at(1)));
            }
            rec.accepted = j.at("accepted").get<std::vector<int32_t>>();
            rec.kstar = j.at("kstar").get<int32_t>();
            for (const auto & e : j.at("spec")) {
                rec.speculative.add(commit_from_json(e, CommitSource::speculative, true));
            }
            for (const auto & e : j.at("verifier")) {
                rec.verifier.add(commit_from_json(e, CommitSource::verifier_commit, false));
            }
            trace.iterations.push_back(std::move(rec));
        } else if (type == "end") {
            if (!j.at("eos_position").is_null()) {
                trace.eos_position = j.at("eos_position").get<Position>();
            }
            trace.final_tokens = j.at("tokens").get<std::vector<TokenId>>();
            saw_end = true;
        } else {
            throw std::runtime_error("trace: unknown record type '" + type + "'");
        }
    }
    if (!saw_header || !saw_end) {
        throw std::runtime_error("trace: missing header or end record: " + path);
    }
    return trace;
}

}  // namespace psd
