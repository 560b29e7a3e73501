#include "psd/count_model.hpp"

#include "psd/hashing.hpp"
#include "psd/text_util.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psd {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void CountModelConfig::validate() const {
    if (order < 1) {
        throw std::invalid_argument("count model: order must be >= 1");
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("count model: alpha must be > 0");
    }
    if (w_left < 0.0 || w_right < 0.0 || w_unigram < 0.0) {
        throw std::invalid_argument("count model: weights must be nonnegative");
    }
    const double sum = w_left + w_right + w_unigram;
    if (sum < 1.0 - 1e-12 || sum > 1.0 + 1e-12) {
        throw std::invalid_argument("count model: weights must sum to 1");
    }
}

CountModel::CountModel(CountModelConfig cfg, Vocabulary vocab)
    : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    vocab_.validate();
    const auto v = static_cast<size_t>(vocab_.size);
    unigram_.assign(v, 0);
    left_.assign(static_cast<size_t>(cfg_.order), std::vector<int64_t>(v * v, 0));
    right_.assign(static_cast<size_t>(cfg_.order), std::vector<int64_t>(v * v, 0));
    left_row_.assign(static_cast<size_t>(cfg_.order), std::vector<int64_t>(v, 0));
    right_row_.assign(static_cast<size_t>(cfg_.order), std::vector<int64_t>(v, 0));
}

CountModel train_count_model(const CountModelConfig & cfg,
                             const std::vector<std::vector<TokenId>> & documents,
                             const Vocabulary & vocab) {
    if (documents.empty()) {
        throw std::invalid_argument("count model: empty corpus");
    }
    CountModel m(cfg, vocab);
    for (const auto & doc : documents) {
        std::vector<TokenId> seq = doc;
        seq.push_back(vocab.eos_id);
        for (TokenId t : seq) {
            if (t == vocab.mask_id || !vocab.is_real(t)) {
                throw std::invalid_argument("count model: corpus token outside real vocabulary");
            }
            m.unigram_[static_cast<size_t>(t)] += 1;
            m.total_ += 1;
        }
        const auto n = static_cast<int64_t>(seq.size());
        for (int32_t gap = 1; gap <= cfg.order; ++gap) {
            auto & lt = m.left_[static_cast<size_t>(gap - 1)];
            auto & rt = m.right_[static_cast<size_t>(gap - 1)];
            auto & lr = m.left_row_[static_cast<size_t>(gap - 1)];
            auto & rr = m.right_row_[static_cast<size_t>(gap - 1)];
            for (int64_t p = 0; p + gap < n; ++p) {
                const TokenId a = seq[static_cast<size_t>(p)];
                const TokenId b = seq[static_cast<size_t>(p + gap)];
                // target b seen `gap` to the right of context a
                lt[m.idx(a, b)] += 1;
                lr[static_cast<size_t>(a)] += 1;
                // target a seen `gap` to the left of context b
                rt[m.idx(b, a)] += 1;
                rr[static_cast<size_t>(b)] += 1;
            }
        }
    }
    return m;
}

int64_t CountModel::pair_count(bool left, int32_t gap, TokenId ctx, TokenId tok) const {
    const auto & t = left ? left_ : right_;
    return t[static_cast<size_t>(gap - 1)][idx(ctx, tok)];
}

void CountModel::mix_unigram_into(std::vector<double> & acc, double weight) const {
    const double denom = static_cast<double>(total_) +
                         cfg_.alpha * static_cast<double>(vocab_.size);
    for (TokenId t = 0; t < vocab_.size; ++t) {
        acc[static_cast<size_t>(t)] +=
            weight * (static_cast<double>(unigram_[static_cast<size_t>(t)]) + cfg_.alpha) / denom;
    }
}

void CountModel::mix_into(std::vector<double> & acc, double weight, bool left, int32_t gap,
                          TokenId ctx) const {
    const auto & table = left ? left_[static_cast<size_t>(gap - 1)]
                              : right_[static_cast<size_t>(gap - 1)];
    const auto & rows = left ? left_row_[static_cast<size_t>(gap - 1)]
                             : right_row_[static_cast<size_t>(gap - 1)];
    const double denom = static_cast<double>(rows[static_cast<size_t>(ctx)]) +
                         cfg_.alpha * static_cast<double>(vocab_.size);
    for (TokenId t = 0; t < vocab_.size; ++t) {
        acc[static_cast<size_t>(t)] +=
            weight * (static_cast<double>(table[idx(ctx, t)]) + cfg_.alpha) / denom;
    }
}

std::vector<double> CountModel::distribution(const SequenceState & state, Position i) const {
    std::vector<double> acc(static_cast<size_t>(vocab_.size), 0.0);

    Position jl = -1;
    for (Position j = i - 1; j >= 0; --j) {
        if (state.tokens[static_cast<size_t>(j)] != vocab_.mask_id) { jl = j; break; }
    }
    Position jr = -1;
    for (Position j = i + 1; j < state.length(); ++j) {
        if (state.tokens[static_cast<size_t>(j)] != vocab_.mask_id) { jr = j; break; }
    }

    if (jl >= 0 && (i - jl) <= cfg_.order) {
        mix_into(acc, cfg_.w_left, true, i - jl, state.tokens[static_cast<size_t>(jl)]);
    } else {
        mix_unigram_into(acc, cfg_.w_left);
    }
    if (jr >= 0 && (jr - i) <= cfg_.order) {
        mix_into(acc, cfg_.w_right, false, jr - i, state.tokens[static_cast<size_t>(jr)]);
    } else {
        mix_unigram_into(acc, cfg_.w_right);
    }
    mix_unigram_into(acc, cfg_.w_unigram);
    return acc;
}

DenoiserOutput CountModel::predict(const SequenceState & state, Scope scope) const {
    const std::vector<Position> masked = masked_positions(state, vocab_, scope);
    if (masked.empty()) {
        throw std::invalid_argument("count model: query has no masked positions");
    }
    DenoiserOutput out;
    out.query_fingerprint = state_fingerprint(state);
    out.predictions.reserve(masked.size());
    for (Position i : masked) {
        const std::vector<double> p = distribution(state, i);
        TokenId best = 0;
        for (TokenId t = 1; t < vocab_.size; ++t) {
            if (p[static_cast<size_t>(t)] > p[static_cast<size_t>(best)]) best = t;
        }
        out.predictions.push_back({i, best, quantize_confidence(p[static_cast<size_t>(best)])});
    }
    return out;
}

void CountModel::save(std::ostream & os) const {
    os << "psd-count-model v1\n";
    const bool has_text = !vocab_.token_text.empty();
    os << "vocab " << vocab_.size << ' ' << vocab_.eos_id << ' ' << (has_text ? 1 : 0) << '\n';
    if (has_text) {
        for (TokenId t = 0; t < vocab_.size; ++t) {
            os << "token " << t << ' ' << escape_token(vocab_.token_text[static_cast<size_t>(t)])
               << '\n';
        }
    }
    os << "config " << cfg_.order << ' ' << fmt_double(cfg_.alpha) << ' '
       << fmt_double(cfg_.w_left) << ' ' << fmt_double(cfg_.w_right) << ' '
       << fmt_double(cfg_.w_unigram) << ' ' << cfg_.seed << '\n';
    for (TokenId t = 0; t < vocab_.size; ++t) {
        if (unigram_[static_cast<size_t>(t)] != 0) {
            os << "unigram " << t << ' ' << unigram_[static_cast<size_t>(t)] << '\n';
        }
    }
    for (int32_t gap = 1; gap <= cfg_.order; ++gap) {
        for (TokenId c = 0; c < vocab_.size; ++c) {
            for (TokenId t = 0; t < vocab_.size; ++t) {
                const int64_t lc = left_[static_cast<size_t>(gap - 1)][idx(c, t)];
                if (lc != 0) os << "left " << gap << ' ' << c << ' ' << t << ' ' << lc << '\n';
            }
        }
    }
    for (int32_t gap = 1; gap <= cfg_.order; ++gap) {
        for (TokenId c = 0; c < vocab_.size; ++c) {
            for (TokenId t = 0; t < vocab_.size; ++t) {
                const int64_t rc = right_[static_cast<size_t>(gap - 1)][idx(c, t)];
                if (rc != 0) os << "right " << gap << ' ' << c << ' ' << t << ' ' << rc << '\n';
            }
        }
    }
    os << "end\n";
}

CountModel CountModel::load(std::istream & is) {
    std::string line;
    if (!std::getline(is, line) || line != "psd-count-model v1") {
        throw std::runtime_error("count model: expected header 'psd-count-model v1', got '" +
                                 line + "'");
    }
    TokenId size = 0, eos = 0;
    int has_text = 0;
    if (!std::getline(is, line)) throw std::runtime_error("count model: truncated file");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> size >> eos >> has_text;
        if (tag != "vocab" || ss.fail()) throw std::runtime_error("count model: bad vocab line");
    }
    std::vector<std::string> text;
    if (has_text) {
        text.assign(static_cast<size_t>(size), "");
        for (TokenId i = 0; i < size; ++i) {
            if (!std::getline(is, line)) throw std::runtime_error("count model: truncated tokens");
            std::istringstream ss(line);
            std::string tag, esc;
            TokenId id;
            ss >> tag >> id >> esc;
            if (tag != "token" || ss.fail() || id < 0 || id >= size) {
                throw std::runtime_error("count model: bad token line");
            }
            text[static_cast<size_t>(id)] = unescape_token(esc);
        }
    }
    CountModelConfig cfg;
    if (!std::getline(is, line)) throw std::runtime_error("count model: truncated file");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> cfg.order >> cfg.alpha >> cfg.w_left >> cfg.w_right >> cfg.w_unigram >>
            cfg.seed;
        if (tag != "config" || ss.fail()) throw std::runtime_error("count model: bad config line");
    }
    CountModel m(cfg, Vocabulary(size, eos, std::move(text)));
    while (std::getline(is, line)) {
        if (line == "end") {
            return m;
        }
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "unigram") {
            TokenId t;
            int64_t c;
            ss >> t >> c;
            if (ss.fail() || t < 0 || t >= size) throw std::runtime_error("count model: bad unigram");
            m.unigram_[static_cast<size_t>(t)] = c;
            m.total_ += c;
        } else if (tag == "left" || tag == "right") {
            int32_t gap;
            TokenId c, t;
            int64_t n;
            ss >> gap >> c >> t >> n;
            if (ss.fail() || gap < 1 || gap > cfg.order || c < 0 || c >= size || t < 0 ||
                t >= size) {
                throw std::runtime_error("count model: bad pair count");
            }
            if (tag == "left") {
                m.left_[static_cast<size_t>(gap - 1)][m.idx(c, t)] = n;
                m.left_row_[static_cast<size_t>(gap - 1)][static_cast<size_t>(c)] += n;
            } else {
                m.right_[static_cast<size_t>(gap - 1)][m.idx(c, t)] = n;
                m.right_row_[static_cast<size_t>(gap - 1)][static_cast<size_t>(c)] += n;
            }
        } else {
            throw std::runtime_error("count model: unknown record '" + tag + "'");
        }
    }
    throw std::runtime_error("count model: missing end marker");
}

void save_count_model(const CountModel & model, const std::string & path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("count model: cannot open for write: " + path);
    model.save(os);
    if (!os) throw std::runtime_error("count model: write failed: " + path);
}

CountModel load_count_model(const std::string & path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("count model: cannot open: " + path);
    return CountModel::load(is);
}

}  // namespace psd
