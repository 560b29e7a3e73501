#pragma once

#include "psd/denoiser.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace psd {

struct CountModelConfig {
    int32_t order = 1;     // neighbor window; gap-specific tables for gaps 1..order
    double  alpha = 0.5;   // add-alpha smoothing
    double  w_left  = 0.4; // interpolation weight, left-context component
    double  w_right = 0.4;
    double  w_unigram = 0.2;
    uint64_t seed = 0;

    void validate() const;
};

/// Count-based denoiser. Prediction at a masked position interpolates
/// P(token | nearest left unmasked token), P(token | nearest right unmasked
/// token) and the unigram distribution, each with add-alpha smoothing over
/// real tokens. Context lookups use the gap-specific table when the nearest
/// unmasked neighbor is within `order` positions and fall back to the unigram
/// distribution otherwise. Each training document is counted with a terminal
/// eos so the model can end sequences.
class CountModel : public Denoiser {
  public:
    CountModel(CountModelConfig cfg, Vocabulary vocab);

    const Vocabulary & vocab() const override { return vocab_; }
    DenoiserOutput predict(const SequenceState & state, Scope scope) const override;

    const CountModelConfig & config() const { return cfg_; }

    /// Full smoothed distribution at one masked position (test hook).
    std::vector<double> distribution(const SequenceState & state, Position i) const;

    void save(std::ostream & os) const;
    static CountModel load(std::istream & is);

    int64_t unigram_count(TokenId t) const { return unigram_[static_cast<size_t>(t)]; }
    int64_t pair_count(bool left, int32_t gap, TokenId ctx, TokenId tok) const;

  private:
    friend CountModel train_count_model(const CountModelConfig &,
                                        const std::vector<std::vector<TokenId>> &,
                                        const Vocabulary &);

    size_t idx(TokenId ctx, TokenId tok) const {
        return static_cast<size_t>(ctx) * static_cast<size_t>(vocab_.size) +
               static_cast<size_t>(tok);
    }
    void mix_into(std::vector<double> & acc, double weight, bool left, int32_t gap,
                  TokenId ctx) const;
    void mix_unigram_into(std::vector<double> & acc, double weight) const;

    CountModelConfig cfg_;
    Vocabulary vocab_;
    std::vector<int64_t> unigram_;                    // [tok]
    int64_t total_ = 0;
    std::vector<std::vector<int64_t>> left_;          // [gap-1][ctx*V + tok]
    std::vector<std::vector<int64_t>> right_;
    std::vector<std::vector<int64_t>> left_row_;      // [gap-1][ctx] row totals
    std::vector<std::vector<int64_t>> right_row_;
};

/// Deterministic count tables from a token corpus (no mask_id allowed).
CountModel train_count_model(const CountModelConfig & cfg,
                             const std::vector<std::vector<TokenId>> & documents,
                             const Vocabulary & vocab);

void save_count_model(const CountModel & model, const std::string & path);
CountModel load_count_model(const std::string & path);

}  // namespace psd
