#include "psd/corpus.hpp"

#include "psd/hashing.hpp"
#include "psd/text_util.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace psd {

Tokenization parse_tokenization(const std::string & s) {
    if (s == "char") return Tokenization::char_level;
    if (s == "whitespace") return Tokenization::whitespace;
    throw std::invalid_argument("unknown tokenization: '" + s + "'");
}

const char * to_string(Tokenization t) {
    return t == Tokenization::char_level ? "char" : "whitespace";
}

namespace {

std::vector<std::string> split_tokens(const std::string & text, Tokenization mode) {
    std::vector<std::string> out;
    if (mode == Tokenization::whitespace) {
        std::istringstream ss(text);
        std::string w;
        while (ss >> w) out.push_back(w);
        return out;
    }
    // one token per UTF-8 code point
    size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        size_t len = 1;
        if ((lead & 0x80u) == 0x00u) len = 1;
        else if ((lead & 0xE0u) == 0xC0u) len = 2;
        else if ((lead & 0xF0u) == 0xE0u) len = 3;
        else if ((lead & 0xF8u) == 0xF0u) len = 4;
        if (i + len > text.size()) len = 1;
        out.push_back(text.substr(i, len));
        i += len;
    }
    return out;
}

}  // namespace

std::vector<TokenId> Corpus::encode(const std::string & text) const {
    std::map<std::string, TokenId> index;
    for (TokenId t = 0; t < vocab.size; ++t) {
        index.emplace(vocab.token_text[static_cast<size_t>(t)], t);
    }
    std::vector<TokenId> out;
    for (const std::string & tok : split_tokens(text, options.tokenization)) {
        auto it = index.find(tok);
        if (it != index.end()) {
            out.push_back(it->second);
        } else if (unk_id.has_value()) {
            out.push_back(*unk_id);
        } else {
            throw std::invalid_argument("corpus: token '" + tok +
                                        "' not in vocabulary and no <unk> reserved");
        }
    }
    return out;
}

std::string Corpus::decode(const std::vector<TokenId> & tokens) const {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (!vocab.is_real(tokens[i])) {
            throw std::invalid_argument("corpus: cannot decode non-real token id");
        }
        if (options.tokenization == Tokenization::whitespace && i > 0) out += ' ';
        out += vocab.token_text[static_cast<size_t>(tokens[i])];
    }
    return out;
}

Corpus build_corpus(const std::vector<std::string> & texts, const CorpusOptions & options,
                    const std::string & source) {
    if (texts.empty()) {
        throw std::invalid_argument("corpus: no input texts");
    }
    if (options.min_count < 1) {
        throw std::invalid_argument("corpus: min_count must be >= 1");
    }

    std::vector<std::vector<std::string>> docs;
    std::map<std::string, int64_t> freq;
    for (const std::string & text : texts) {
        std::vector<std::string> toks = split_tokens(text, options.tokenization);
        if (toks.empty()) continue;
        for (const std::string & t : toks) freq[t] += 1;
        docs.push_back(std::move(toks));
    }
    std::vector<std::pair<std::string, int64_t>> kept;
    for (const auto & [tok, n] : freq) {
        if (n >= options.min_count) kept.emplace_back(tok, n);
    }
    if (kept.empty() || docs.empty()) {
        throw std::invalid_argument("corpus: empty after frequency filtering");
    }
    std::sort(kept.begin(), kept.end(), [](const auto & a, const auto & b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> token_text;
    std::vector<int64_t> counts;
    std::map<std::string, TokenId> index;
    for (const auto & [tok, n] : kept) {
        index.emplace(tok, static_cast<TokenId>(token_text.size()));
        token_text.push_back(tok);
        counts.push_back(n);
    }
    std::optional<TokenId> unk_id;
    if (options.min_count > 1) {
        unk_id = static_cast<TokenId>(token_text.size());
        token_text.push_back("<unk>");
        counts.push_back(0);
    }
    const auto eos_id = static_cast<TokenId>(token_text.size());
    token_text.push_back("<eos>");
    counts.push_back(0);

    Corpus corpus;
    corpus.vocab = Vocabulary(static_cast<TokenId>(token_text.size()), eos_id, token_text);
    corpus.unk_id = unk_id;
    corpus.token_counts = std::move(counts);
    corpus.source = source;
    corpus.options = options;
    for (const auto & toks : docs) {
        std::vector<TokenId> ids;
        ids.reserve(toks.size());
        for (const std::string & t : toks) {
            auto it = index.find(t);
            if (it != index.end()) {
                ids.push_back(it->second);
            } else {
                ids.push_back(*unk_id);  // min_count == 1 keeps everything
                corpus.token_counts[static_cast<size_t>(*unk_id)] += 1;
            }
        }
        corpus.documents.push_back(std::move(ids));
    }
    return corpus;
}

Corpus load_corpus_file(const std::string & path, const CorpusOptions & options) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("corpus: cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return build_corpus(lines, options, path);
}

void save_vocab(const Corpus & corpus, const std::string & path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("vocab: cannot open for write: " + path);
    os << "psd-vocab v1\n";
    for (TokenId t = 0; t < corpus.vocab.size; ++t) {
        os << t << '\t' << escape_token(corpus.vocab.token_text[static_cast<size_t>(t)]) << '\t'
           << corpus.token_counts[static_cast<size_t>(t)] << '\n';
    }
    if (!os) throw std::runtime_error("vocab: write failed: " + path);
}

std::vector<EvalPair> make_eval_suite(const Corpus & corpus, int32_t n_prompts,
                                      Position prompt_len, uint64_t seed) {
    if (n_prompts < 0 || prompt_len < 1) {
        throw std::invalid_argument("eval suite: need n_prompts >= 0 and prompt_len >= 1");
    }
    std::vector<size_t> eligible;
    for (size_t d = 0; d < corpus.documents.size(); ++d) {
        if (corpus.documents[d].size() > static_cast<size_t>(prompt_len)) eligible.push_back(d);
    }
    if (n_prompts > 0 && eligible.empty()) {
        throw std::invalid_argument("eval suite: no document continues past prompt_len");
    }
    std::vector<EvalPair> out;
    out.reserve(static_cast<size_t>(n_prompts));
    for (int32_t i = 0; i < n_prompts; ++i) {
        const uint64_t h = hash_words({seed, 0x65766131ull, static_cast<uint64_t>(i)});
        const auto & doc = corpus.documents[eligible[h % eligible.size()]];
        EvalPair pair;
        pair.prompt.assign(doc.begin(), doc.begin() + prompt_len);
        pair.reference = doc;
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace psd
