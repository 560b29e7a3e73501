// psd — experiment runner for the parallel speculative decoding engine.
//
// Subcommands:
//   decode     run one configuration, write JSONL traces, print a summary
//   sweep      run a parameter grid, write traces plus a long-format CSV
//   calibrate  estimate per-rank acceptance from chain probe traces and
//              emit a calibrated draft graph
//   analyze    recompute metrics from traces: precision curves, contribution
//              profiles, acceptance by rank, JSON summary
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.
// PSD_LOG=debug|info|warn|error controls stderr logging.

#include "psd/corpus.hpp"
#include "psd/count_model.hpp"
#include "psd/engine.hpp"
#include "psd/frontier_oracle.hpp"
#include "psd/hashing.hpp"
#include "psd/log.hpp"
#include "psd/metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct DataConfig {
    std::string kind = "synthetic";  // synthetic | corpus
    // synthetic
    int32_t vocab_size = 32;
    int32_t prompt_len = 4;
    int32_t reference_len_min = 48;
    int32_t reference_len_max = 96;
    // corpus
    std::string path;
    psd::Tokenization tokenization = psd::Tokenization::char_level;
    int64_t min_count = 1;
};

struct DenoiserConfig {
    std::string kind = "frontier";  // frontier | count
    psd::FrontierOracleConfig frontier;
    psd::CountModelConfig count;
};

struct RunConfig {
    uint64_t base_seed = 1;
    int32_t replicates = 1;
    std::string out_dir = "out";
    DataConfig data;
    DenoiserConfig denoiser;
    psd::EngineConfig engine;
    std::string graph_path;  // optional calibrated graph override
    std::vector<int32_t> k_list = {5, 7, 9};
    int32_t h_max = 10;
    int32_t buckets = 10;
    std::map<std::string, std::vector<std::string>> sweep;  // optional grid axes
};

class Validator {
  public:
    void fail(const std::string & field, const std::string & msg) {
        errors_.push_back(field + ": " + msg);
    }
    void finish() const {
        if (errors_.empty()) return;
        std::string all = "invalid configuration";
        for (const std::string & e : errors_) all += "\n  " + e;
        throw ConfigError(all);
    }

  private:
    std::vector<std::string> errors_;
};

template <typename T>
T get_or(const json & j, const std::string & key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

RunConfig parse_run_config(const std::string & path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const std::exception & e) {
        throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
    }

    RunConfig cfg;
    Validator v;
    try {
        cfg.base_seed = get_or<uint64_t>(j, "seed", 1);
        cfg.replicates = get_or<int32_t>(j, "replicates", 1);
        if (cfg.replicates < 1) v.fail("replicates", "must be >= 1");
        if (j.contains("output")) {
            cfg.out_dir = get_or<std::string>(j.at("output"), "dir", "out");
        }

        if (j.contains("data")) {
            const json & d = j.at("data");
            cfg.data.kind = get_or<std::string>(d, "kind", "synthetic");
            if (cfg.data.kind != "synthetic" && cfg.data.kind != "corpus") {
                v.fail("data.kind", "must be 'synthetic' or 'corpus'");
            }
            cfg.data.vocab_size = get_or<int32_t>(d, "vocab_size", 32);
            if (cfg.data.vocab_size < 2) v.fail("data.vocab_size", "must be >= 2");
            cfg.data.prompt_len = get_or<int32_t>(d, "prompt_len", 4);
            if (cfg.data.prompt_len < 1) v.fail("data.prompt_len", "must be >= 1");
            cfg.data.reference_len_min = get_or<int32_t>(d, "reference_len_min", 48);
            cfg.data.reference_len_max = get_or<int32_t>(d, "reference_len_max", 96);
            if (cfg.data.reference_len_min < 1 ||
                cfg.data.reference_len_max < cfg.data.reference_len_min) {
                v.fail("data.reference_len_max",
                       "need 1 <= reference_len_min <= reference_len_max");
            }
            cfg.data.path = get_or<std::string>(d, "path", "");
            if (cfg.data.kind == "corpus") {
                if (cfg.data.path.empty()) {
                    v.fail("data.path", "required for data.kind=corpus");
                } else if (!fs::exists(cfg.data.path)) {
                    v.fail("data.path", "file does not exist: " + cfg.data.path);
                }
                try {
                    cfg.data.tokenization =
                        psd::parse_tokenization(get_or<std::string>(d, "tokenization", "char"));
                } catch (const std::exception & e) {
                    v.fail("data.tokenization", e.what());
                }
                cfg.data.min_count = get_or<int64_t>(d, "min_count", 1);
                if (cfg.data.min_count < 1) v.fail("data.min_count", "must be >= 1");
            }
        }

        if (j.contains("denoiser")) {
            const json & d = j.at("denoiser");
            cfg.denoiser.kind = get_or<std::string>(d, "kind", "frontier");
            if (cfg.denoiser.kind == "frontier") {
                auto & f = cfg.denoiser.frontier;
                f.c_max = get_or<double>(d, "c_max", 0.99);
                f.decay = get_or<double>(d, "decay", 0.03);
                f.noise_scale = get_or<double>(d, "noise_scale", 0.0);
                f.correctness = get_or<double>(d, "correctness", 1.0);
                f.floor_eps = get_or<double>(d, "floor", 0.05);
                f.drift = get_or<bool>(d, "drift", false);
                try {
                    f.validate();
                } catch (const std::exception & e) {
                    v.fail("denoiser", e.what());
                }
            } else if (cfg.denoiser.kind == "count") {
                auto & c = cfg.denoiser.count;
                c.order = get_or<int32_t>(d, "order", 1);
                c.alpha = get_or<double>(d, "alpha", 0.5);
                if (d.contains("weights")) {
                    const auto w = d.at("weights").get<std::vector<double>>();
                    if (w.size() != 3) {
                        v.fail("denoiser.weights", "expected [left, right, unigram]");
                    } else {
                        c.w_left = w[0];
                        c.w_right = w[1];
                        c.w_unigram = w[2];
                    }
                }
                try {
                    c.validate();
                } catch (const std::exception & e) {
                    v.fail("denoiser", e.what());
                }
            } else {
                v.fail("denoiser.kind", "must be 'frontier' or 'count'");
            }
        }

        if (j.contains("engine")) {
            const json & e = j.at("engine");
            try {
                cfg.engine.mode = psd::parse_engine_mode(get_or<std::string>(e, "mode", "psd"));
            } catch (const std::exception & ex) {
                v.fail("engine.mode", ex.what());
            }
            if (e.contains("policy")) {
                const json & p = e.at("policy");
                try {
                    cfg.engine.policy.kind =
                        psd::parse_policy_kind(get_or<std::string>(p, "kind", "confidence"));
                } catch (const std::exception & ex) {
                    v.fail("engine.policy.kind", ex.what());
                }
                cfg.engine.policy.tau = get_or<double>(p, "tau", 0.9);
                cfg.engine.policy.anchor_tau = get_or<double>(p, "anchor_tau", 0.9);
                cfg.engine.policy.window_w = get_or<int32_t>(p, "window", 1);
                try {
                    cfg.engine.policy.fallback =
                        psd::parse_fallback_mode(get_or<std::string>(p, "fallback", "top1"));
                } catch (const std::exception & ex) {
                    v.fail("engine.policy.fallback", ex.what());
                }
                try {
                    cfg.engine.policy.validate();
                } catch (const std::exception & ex) {
                    v.fail("engine.policy.tau", ex.what());
                }
            }
            if (e.contains("topology")) {
                const json & t = e.at("topology");
                cfg.engine.topology.depth = get_or<int32_t>(t, "depth", 3);
                cfg.engine.topology.branch = get_or<int32_t>(t, "branch", 0);
                cfg.engine.topology.budget = get_or<int32_t>(t, "budget", 64);
                cfg.graph_path = get_or<std::string>(t, "graph_path", "");
                if (!cfg.graph_path.empty() && !fs::exists(cfg.graph_path)) {
                    v.fail("engine.topology.graph_path",
                           "file does not exist: " + cfg.graph_path);
                }
                try {
                    cfg.engine.topology.validate();
                } catch (const std::exception & ex) {
                    v.fail("engine.topology", ex.what());
                }
            }
            cfg.engine.block_len = get_or<int32_t>(e, "block_len", 32);
            cfg.engine.max_new_tokens = get_or<int32_t>(e, "max_new_tokens", 512);
            cfg.engine.eos_stop = get_or<bool>(e, "eos_stop", true);
            if (cfg.engine.block_len < 1) v.fail("engine.block_len", "must be >= 1");
            if (cfg.engine.max_new_tokens < 1) v.fail("engine.max_new_tokens", "must be >= 1");
        }

        if (j.contains("metrics")) {
            const json & m = j.at("metrics");
            cfg.k_list = get_or<std::vector<int32_t>>(m, "k_list", cfg.k_list);
            cfg.h_max = get_or<int32_t>(m, "h_max", 10);
            cfg.buckets = get_or<int32_t>(m, "buckets", 10);
            if (cfg.h_max < 1) v.fail("metrics.h_max", "must be >= 1");
            if (cfg.buckets < 1) v.fail("metrics.buckets", "must be >= 1");
        }

        if (j.contains("sweep")) {
            for (const auto & [key, values] : j.at("sweep").items()) {
                std::vector<std::string> vals;
                for (const auto & item : values) {
                    vals.push_back(item.is_string() ? item.get<std::string>() : item.dump());
                }
                cfg.sweep[key] = std::move(vals);
            }
        }

        if (cfg.denoiser.kind == "count" && cfg.data.kind != "corpus") {
            v.fail("denoiser.kind", "count model requires data.kind=corpus");
        }
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception & e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    v.finish();
    return cfg;
}

// ---------------------------------------------------------------------------
// experiment execution
// ---------------------------------------------------------------------------

struct Instance {
    std::vector<psd::TokenId> prompt;
    std::unique_ptr<psd::Denoiser> denoiser;
};

struct Experiment {
    RunConfig cfg;
    std::optional<psd::Corpus> corpus;
    std::optional<psd::CountModel> count_model;
    std::optional<psd::DraftGraph> graph_override;

    explicit Experiment(RunConfig run_cfg) : cfg(std::move(run_cfg)) {
        if (cfg.data.kind == "corpus") {
            corpus = psd::load_corpus_file(cfg.data.path,
                                           {cfg.data.tokenization, cfg.data.min_count});
            PSD_LOG_INFO("loaded corpus %s: %zu documents, vocab %d", cfg.data.path.c_str(),
                         corpus->documents.size(), corpus->vocab.size);
        }
        if (cfg.denoiser.kind == "count") {
            psd::CountModelConfig ccfg = cfg.denoiser.count;
            ccfg.seed = cfg.base_seed;
            count_model = psd::train_count_model(ccfg, corpus->documents, corpus->vocab);
        }
        if (!cfg.graph_path.empty()) {
            graph_override = psd::load_draft_graph(cfg.graph_path);
            PSD_LOG_INFO("using calibrated draft graph %s (%d nodes)", cfg.graph_path.c_str(),
                         graph_override->node_count());
        }
    }

    psd::Vocabulary vocab() const {
        if (corpus.has_value()) return corpus->vocab;
        return psd::Vocabulary(cfg.data.vocab_size, cfg.data.vocab_size - 1);
    }

    Instance make_instance(uint64_t seed) const {
        Instance inst;
        const psd::Vocabulary voc = vocab();
        std::vector<psd::TokenId> reference;
        if (corpus.has_value()) {
            const auto pairs = psd::make_eval_suite(*corpus, 1, cfg.data.prompt_len, seed);
            inst.prompt = pairs[0].prompt;
            reference = pairs[0].reference;
        } else {
            const int32_t span = cfg.data.reference_len_max - cfg.data.reference_len_min + 1;
            const auto len = cfg.data.reference_len_min +
                             static_cast<int32_t>(psd::hash_words({seed, 0x6c656e}) %
                                                  static_cast<uint64_t>(span));
            const int32_t total = cfg.data.prompt_len + len;
            reference.resize(static_cast<size_t>(total));
            for (int32_t i = 0; i < total; ++i) {
                const uint64_t h = psd::hash_words({seed, 0x726566, static_cast<uint64_t>(i)});
                reference[static_cast<size_t>(i)] =
                    static_cast<psd::TokenId>(h % static_cast<uint64_t>(voc.size - 1));
            }
            reference.back() = voc.eos_id;
            inst.prompt.assign(reference.begin(), reference.begin() + cfg.data.prompt_len);
        }

        if (cfg.denoiser.kind == "count") {
            inst.denoiser = std::make_unique<psd::CountModel>(*count_model);
        } else {
            psd::FrontierOracleConfig fcfg = cfg.denoiser.frontier;
            fcfg.reference = std::move(reference);
            fcfg.seed = seed;
            inst.denoiser = std::make_unique<psd::FrontierOracle>(fcfg, voc);
        }
        return inst;
    }

    psd::DecodeResult run_replicate(int32_t replicate) const {
        const uint64_t seed = cfg.base_seed + static_cast<uint64_t>(replicate);
        const Instance inst = make_instance(seed);
        psd::EngineConfig ecfg = cfg.engine;
        ecfg.seed = seed;
        return psd::decode(ecfg, *inst.denoiser, inst.prompt,
                           graph_override.has_value() ? &*graph_override : nullptr);
    }
};

struct ReplicateRow {
    int32_t replicate;
    uint64_t seed;
    int64_t tokens;
    int64_t passes;
    double tpf_value;
    double reveal;
    std::vector<double> acceptance;
};

ReplicateRow summarize(const psd::DecodeTrace & trace, int32_t replicate, uint64_t seed) {
    ReplicateRow row;
    row.replicate = replicate;
    row.seed = seed;
    const psd::EosCutoff cut = psd::eos_cutoff(trace);
    row.tokens = 0;
    row.passes = 0;
    for (size_t t = 0; t < trace.iterations.size(); ++t) {
        if (cut.iteration >= 0 && static_cast<int64_t>(t) > cut.iteration) break;
        row.passes += trace.iterations[t].forward_passes;
        for (const psd::CommitSet * cs :
             {&trace.iterations[t].spatial, &trace.iterations[t].speculative,
              &trace.iterations[t].verifier}) {
            for (const psd::Commit & c : cs->entries) {
                if (cut.position < 0 || c.pos <= cut.position) ++row.tokens;
            }
        }
    }
    row.tpf_value = psd::tpf(trace);
    row.reveal = psd::mean_reveal_rate(trace);
    row.acceptance = psd::acceptance_rate_by_rank({trace});
    return row;
}

std::string join_rates(const std::vector<double> & rates) {
    std::string out;
    for (size_t i = 0; i < rates.size(); ++i) {
        if (i > 0) out += '|';
        out += fmt9(rates[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// trace globbing
// ---------------------------------------------------------------------------

bool wildcard_match(const std::string & pattern, const std::string & name) {
    // '*' only, no escapes: classic two-pointer scan
    size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && pattern[p] == name[n]) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<std::string> expand_traces(const std::string & pattern) {
    std::vector<std::string> out;
    const fs::path p(pattern);
    if (pattern.find('*') == std::string::npos) {
        if (fs::is_directory(p)) {
            for (const auto & entry : fs::directory_iterator(p)) {
                if (entry.path().extension() == ".jsonl") out.push_back(entry.path().string());
            }
        } else if (fs::exists(p)) {
            out.push_back(pattern);
        }
    } else {
        const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        if (fs::is_directory(dir)) {
            for (const auto & entry : fs::directory_iterator(dir)) {
                if (wildcard_match(p.filename().string(), entry.path().filename().string())) {
                    out.push_back(entry.path().string());
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        throw std::runtime_error("no trace files match '" + pattern + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

int cmd_decode(const RunConfig & run_cfg) {
    Experiment exp(run_cfg);
    fs::create_directories(run_cfg.out_dir);

    double tpf_sum = 0.0;
    int64_t spatial = 0, speculative = 0, verifier = 0;
    for (int32_t r = 0; r < run_cfg.replicates; ++r) {
        const psd::DecodeResult res = exp.run_replicate(r);
        const std::string trace_path =
            (fs::path(run_cfg.out_dir) / ("trace_r" + std::to_string(r) + ".jsonl")).string();
        psd::write_trace_jsonl(res.trace, trace_path);
        const ReplicateRow row =
            summarize(res.trace, r, run_cfg.base_seed + static_cast<uint64_t>(r));
        tpf_sum += row.tpf_value;
        for (const psd::IterationRecord & rec : res.trace.iterations) {
            spatial += static_cast<int64_t>(rec.spatial.size());
            speculative += static_cast<int64_t>(rec.speculative.size());
            verifier += static_cast<int64_t>(rec.verifier.size());
        }
        std::printf("replicate %d seed %llu tokens %lld passes %lld tpf %s reveal %s\n", r,
                    static_cast<unsigned long long>(row.seed),
                    static_cast<long long>(row.tokens), static_cast<long long>(row.passes),
                    fmt9(row.tpf_value).c_str(), fmt9(row.reveal).c_str());
    }
    std::printf("mean_tpf %s\n", fmt9(tpf_sum / run_cfg.replicates).c_str());
    std::printf("commits spatial %lld speculative %lld verifier %lld\n",
                static_cast<long long>(spatial), static_cast<long long>(speculative),
                static_cast<long long>(verifier));
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

const std::vector<std::string> kGridKeys = {"d", "tau", "policy", "noise_scale", "correctness"};

std::string canonical_grid_key(std::string key) {
    if (key == "s") return "noise_scale";
    if (key == "rho") return "correctness";
    return key;
}

RunConfig apply_grid_point(RunConfig cfg, const std::map<std::string, std::string> & point) {
    for (const auto & [key, value] : point) {
        if (key == "d") {
            cfg.engine.topology.depth = std::stoi(value);
        } else if (key == "tau") {
            cfg.engine.policy.tau = std::stod(value);
            cfg.engine.policy.anchor_tau = cfg.engine.policy.tau;
        } else if (key == "policy") {
            cfg.engine.policy.kind = psd::parse_policy_kind(value);
        } else if (key == "noise_scale") {
            cfg.denoiser.frontier.noise_scale = std::stod(value);
        } else if (key == "correctness") {
            cfg.denoiser.frontier.correctness = std::stod(value);
        }
    }
    cfg.engine.policy.validate();
    cfg.engine.topology.validate();
    cfg.denoiser.frontier.validate();
    return cfg;
}

int cmd_sweep(const RunConfig & base_cfg, const std::vector<std::string> & grid_flags) {
    std::map<std::string, std::vector<std::string>> axes_map;
    for (const auto & [key, values] : base_cfg.sweep) {
        axes_map[canonical_grid_key(key)] = values;
    }
    for (const std::string & flag : grid_flags) {
        const auto eq = flag.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("grid: expected KEY=V1,V2,... got '" + flag + "'");
        }
        const std::string key = canonical_grid_key(flag.substr(0, eq));
        std::vector<std::string> values;
        std::stringstream ss(flag.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) values.push_back(item);
        }
        if (values.empty()) throw ConfigError("grid: no values for key '" + key + "'");
        axes_map[key] = values;
    }
    if ((axes_map.count("noise_scale") != 0 || axes_map.count("correctness") != 0) &&
        base_cfg.denoiser.kind != "frontier") {
        throw ConfigError("grid: noise_scale/correctness axes require the frontier denoiser");
    }
    std::vector<GridAxis> axes;
    for (const std::string & key : kGridKeys) {  // fixed expansion order
        auto it = axes_map.find(key);
        if (it != axes_map.end()) {
            axes.push_back({key, it->second});
            axes_map.erase(it);
        }
    }
    if (!axes_map.empty()) {
        throw ConfigError("grid: unknown key '" + axes_map.begin()->first +
                          "' (known: d, tau, policy, noise_scale/s, correctness/rho)");
    }
    if (axes.empty()) {
        throw ConfigError("grid: empty grid; pass --grid KEY=V1,V2,... or a sweep section");
    }

    std::vector<std::map<std::string, std::string>> points = {{}};
    for (const GridAxis & axis : axes) {
        std::vector<std::map<std::string, std::string>> next;
        for (const auto & point : points) {
            for (const std::string & value : axis.values) {
                auto extended = point;
                extended[axis.key] = value;
                next.push_back(std::move(extended));
            }
        }
        points = std::move(next);
    }

    fs::create_directories(base_cfg.out_dir);
    fs::create_directories(fs::path(base_cfg.out_dir) / "traces");
    const std::string csv_path = (fs::path(base_cfg.out_dir) / "sweep.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    csv << "d,tau,policy,noise_scale,correctness,replicate,seed,mode,tokens,passes,tpf,"
           "mean_reveal_rate,acceptance_by_rank\n";

    for (size_t g = 0; g < points.size(); ++g) {
        const RunConfig cfg = apply_grid_point(base_cfg, points[g]);
        Experiment exp(cfg);
        for (int32_t r = 0; r < cfg.replicates; ++r) {
            const psd::DecodeResult res = exp.run_replicate(r);
            char name[64];
            std::snprintf(name, sizeof(name), "g%03zu_r%d.jsonl", g, r);
            psd::write_trace_jsonl(res.trace,
                                   (fs::path(cfg.out_dir) / "traces" / name).string());
            const ReplicateRow row =
                summarize(res.trace, r, cfg.base_seed + static_cast<uint64_t>(r));
            csv << cfg.engine.topology.depth << ',' << fmt9(cfg.engine.policy.tau) << ','
                << psd::policy_label(cfg.engine.policy.kind) << ','
                << fmt9(cfg.denoiser.frontier.noise_scale) << ','
                << fmt9(cfg.denoiser.frontier.correctness) << ',' << r << ','
                << cfg.base_seed + static_cast<uint64_t>(r) << ','
                << psd::to_string(cfg.engine.mode) << ',' << row.tokens << ',' << row.passes
                << ',' << fmt9(row.tpf_value) << ',' << fmt9(row.reveal) << ','
                << join_rates(row.acceptance) << '\n';
        }
    }
    csv.close();
    std::printf("sweep: %zu grid points x %d replicates -> %s\n", points.size(),
                base_cfg.replicates, csv_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const std::string & traces_glob, int32_t k_max, const std::string & out_path) {
    const std::vector<std::string> paths = expand_traces(traces_glob);
    std::vector<psd::DecodeTrace> traces;
    traces.reserve(paths.size());
    for (const std::string & p : paths) {
        traces.push_back(psd::read_trace_jsonl(p));
    }
    std::vector<psd::RankEstimate> stats;
    const psd::DraftGraph graph = psd::calibrate_topology(traces, k_max, &stats);
    psd::save_draft_graph(graph, out_path);

    std::vector<double> p_hat;
    for (size_t j = 0; j < stats.size(); ++j) {
        p_hat.push_back(stats[j].p_hat());
        std::printf("rank %zu offered %lld accepted %lld p_hat %s\n", j + 1,
                    static_cast<long long>(stats[j].offered),
                    static_cast<long long>(stats[j].accepted), fmt9(stats[j].p_hat()).c_str());
    }
    std::printf("graph nodes %d expected_accepted_tokens %s -> %s\n", graph.node_count(),
                fmt9(psd::expected_accepted_tokens(graph, p_hat)).c_str(), out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const std::string & traces_glob, const std::string & out_dir,
                const std::vector<int32_t> & k_list, int32_t h_max, int32_t buckets) {
    const std::vector<std::string> paths = expand_traces(traces_glob);
    std::vector<psd::DecodeTrace> traces;
    traces.reserve(paths.size());
    for (const std::string & p : paths) {
        traces.push_back(psd::read_trace_jsonl(p));
    }
    const psd::MetricsReport report = psd::build_metrics_report(traces, k_list, h_max, buckets);
    fs::create_directories(out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "precision.csv", std::ios::binary);
        csv << "variant,k,h,empirical,oracle_bound\n";
        for (const auto & [key, value] : report.precision_curves) {
            const auto & [variant, k, h] = key;
            csv << psd::to_string(variant) << ',' << k << ',' << h << ',' << fmt9(value) << ','
                << fmt9(report.oracle_curves.at(key)) << '\n';
        }
    }
    {
        std::ofstream csv(fs::path(out_dir) / "contribution.csv", std::ios::binary);
        csv << "bucket,progress_lo,progress_hi,total,speculative,spatial_pct,speculative_pct\n";
        for (size_t b = 0; b < report.contribution.size(); ++b) {
            const psd::ContributionBucket & bucket = report.contribution[b];
            csv << b << ',' << fmt9(static_cast<double>(b) / buckets) << ','
                << fmt9(static_cast<double>(b + 1) / buckets) << ',' << bucket.total << ','
                << bucket.speculative << ',' << fmt9(bucket.spatial_pct) << ','
                << fmt9(bucket.speculative_pct) << '\n';
        }
    }
    {
        const auto stats = psd::estimate_rank_acceptance(traces);
        std::ofstream csv(fs::path(out_dir) / "acceptance.csv", std::ios::binary);
        csv << "rank,offered,accepted,rate\n";
        for (size_t j = 0; j < stats.size(); ++j) {
            csv << j + 1 << ',' << stats[j].offered << ',' << stats[j].accepted << ','
                << fmt9(stats[j].p_hat()) << '\n';
        }
    }
    {
        int64_t violations = 0;
        ordered_json per_trace = ordered_json::array();
        for (size_t i = 0; i < traces.size(); ++i) {
            const auto audit = psd::audit_commit_legality(traces[i]);
            violations += static_cast<int64_t>(audit.size());
            ordered_json entry;
            entry["path"] = paths[i];
            entry["tpf"] = fmt9(report.tpf_per_trace[i]);
            entry["audit_violations"] = audit.size();
            per_trace.push_back(std::move(entry));
        }
        ordered_json summary;
        summary["traces"] = traces.size();
        summary["tpf_mean"] = fmt9(report.tpf_mean);
        summary["mean_reveal_rate"] = fmt9(report.mean_reveal_rate);
        summary["acceptance_rate_by_rank"] = join_rates(report.acceptance_rate);
        summary["audit_violations"] = violations;
        summary["per_trace"] = std::move(per_trace);
        std::ofstream os(fs::path(out_dir) / "summary.json", std::ios::binary);
        os << summary.dump(2) << '\n';
        std::printf("analyze: %zu traces tpf_mean %s audit_violations %lld -> %s\n",
                    traces.size(), fmt9(report.tpf_mean).c_str(),
                    static_cast<long long>(violations), out_dir.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"parallel speculative decoding experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int32_t replicates_override = -1;
    int64_t seed_override = -1;

    auto add_run_flags = [&](CLI::App * cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON")->required();
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--replicates", replicates_override, "replicate count override");
        cmd->add_option("--seed", seed_override, "base seed override");
    };

    CLI::App * decode_cmd = app.add_subcommand("decode", "run one configuration");
    add_run_flags(decode_cmd);

    std::vector<std::string> grid_flags;
    CLI::App * sweep_cmd = app.add_subcommand("sweep", "run a parameter grid");
    add_run_flags(sweep_cmd);
    sweep_cmd->add_option("--grid", grid_flags, "grid axis KEY=V1,V2,... (repeatable)");

    std::string traces_glob;
    std::string graph_out = "calibrated_graph.txt";
    int32_t k_max = 8;
    CLI::App * cal_cmd = app.add_subcommand("calibrate", "calibrate a draft graph from traces");
    cal_cmd->add_option("--traces", traces_glob, "trace files (glob or directory)")->required();
    cal_cmd->add_option("--k-max", k_max, "node budget including the root");
    cal_cmd->add_option("--out", graph_out, "output graph path");

    std::string analyze_out = "analysis";
    std::string k_list_flag = "5,7,9";
    int32_t h_max = 10;
    int32_t buckets = 10;
    CLI::App * an_cmd = app.add_subcommand("analyze", "recompute metrics from traces");
    an_cmd->add_option("--traces", traces_glob, "trace files (glob or directory)")->required();
    an_cmd->add_option("--out", analyze_out, "output directory");
    an_cmd->add_option("--k", k_list_flag, "candidate set sizes, comma separated");
    an_cmd->add_option("--h-max", h_max, "maximum lookahead horizon");
    an_cmd->add_option("--buckets", buckets, "contribution profile buckets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(decode_cmd) || app.got_subcommand(sweep_cmd)) {
            RunConfig cfg = parse_run_config(config_path);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (replicates_override > 0) cfg.replicates = replicates_override;
            if (seed_override >= 0) cfg.base_seed = static_cast<uint64_t>(seed_override);
            return app.got_subcommand(decode_cmd) ? cmd_decode(cfg)
                                                  : cmd_sweep(cfg, grid_flags);
        }
        if (app.got_subcommand(cal_cmd)) {
            return cmd_calibrate(traces_glob, k_max, graph_out);
        }
        if (app.got_subcommand(an_cmd)) {
            std::vector<int32_t> k_list;
            std::stringstream ss(k_list_flag);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) k_list.push_back(std::stoi(item));
            }
            if (k_list.empty()) throw ConfigError("--k: no candidate set sizes given");
            return cmd_analyze(traces_glob, analyze_out, k_list, h_max, buckets);
        }
    } catch (const ConfigError & e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception & e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
