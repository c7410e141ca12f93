#ifndef CONVLAT_NGRAM_LM_HPP
#define CONVLAT_NGRAM_LM_HPP

#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "convlat/errors.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

/// History of up to order-1 token ids; always a suffix of the words consumed
/// so far, truncated to the longest context the model knows.
struct NgramStateId {
  std::vector<TokenId> history;
  bool operator==(const NgramStateId&) const = default;
};

/// ARPA back-off n-gram model.  Probabilities are stored as negative natural
/// log costs (converted from log10 on load).  Exposed both as a sentence
/// scorer and as a deterministic on-demand acceptor via score_word.
class NgramModel {
 public:
  struct Entry {
    double cost = 0.0;          // -ln P(w | context)
    double backoff_cost = 0.0;  // -ln alpha(context); 0 when absent
    bool has_backoff = false;
  };

  int order() const { return order_; }
  const Vocabulary& vocab() const { return *vocab_; }

  /// State conditioned on <s> only.
  NgramStateId begin_state() const;

  /// Cost of `word` given `state` with standard back-off recursion, and the
  /// successor state (longest known suffix of history+word, length <= n-1).
  /// OOV ids resolve to <unk> when the model has one, else UnknownTokenError.
  std::pair<double, NgramStateId> score_word(const NgramStateId& state,
                                             TokenId word) const;

  /// Cost of </s> given `state`.
  double end_cost(const NgramStateId& state) const;

  /// Sum of score_word over the sequence wrapped in <s> ... </s>.
  double score_sentence(const std::vector<TokenId>& words) const;

  /// All explicit contexts of length <= n-1 (for diagnostics and tests).
  std::vector<std::vector<TokenId>> explicit_histories() const;

  bool has_entry(const std::vector<TokenId>& gram) const;
  const Entry* find_entry(const std::vector<TokenId>& gram) const;

  struct LoadOptions {
    bool strict = false;  // reject count mismatches and missing prefixes
  };

  /// Parses ARPA text.  Words resolve against `vocab` (which must contain
  /// them all).  Minor defects (declared-count mismatch, missing prefix
  /// n-grams) are repaired unless opts.strict.
  static NgramModel load_arpa(std::istream& in, const Vocabulary& vocab,
                              const LoadOptions& opts);
  static NgramModel load_arpa(std::istream& in, const Vocabulary& vocab);

  void write_arpa(std::ostream& out) const;

 private:
  friend NgramModel train_addone_ngram(const std::vector<std::vector<TokenId>>&,
                                       int, const Vocabulary&);

  struct KeyHash {
    size_t operator()(const std::vector<TokenId>& k) const {
      size_t h = 1469598103934665603ull;
      for (TokenId t : k) {
        h ^= static_cast<size_t>(static_cast<uint32_t>(t));
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  using EntryMap = std::unordered_map<std::vector<TokenId>, Entry, KeyHash>;

  double backoff_cost_of(const std::vector<TokenId>& context) const;
  double raw_cost(const std::vector<TokenId>& context, TokenId word) const;
  TokenId map_word(TokenId word) const;
  void patch_missing_prefixes(bool strict);

  int order_ = 0;
  EntryMap entries_;
  const Vocabulary* vocab_ = nullptr;
  TokenId bos_ = kNoToken, eos_ = kNoToken, unk_ = kNoToken;
};

/// Counting trainer with add-one smoothing and Katz-style backoff weights;
/// exists to build desk-scale fixtures and first-pass graph scores.
/// Every vocabulary word (except <eps> and <s>) gets an explicit unigram,
/// so per-history distributions normalize exactly.
NgramModel train_addone_ngram(const std::vector<std::vector<TokenId>>& corpus,
                              int order, const Vocabulary& vocab);

}  // namespace convlat

#endif  // CONVLAT_NGRAM_LM_HPP
