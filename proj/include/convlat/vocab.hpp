#ifndef CONVLAT_VOCAB_HPP
#define CONVLAT_VOCAB_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convlat/errors.hpp"

namespace convlat {

using TokenId = std::int32_t;
using StateId = std::int32_t;

constexpr TokenId kEpsToken = 0;
constexpr TokenId kNoToken = -1;

/// Token <-> id map shared by lattices and language models.
/// Id 0 is always "<eps>"; "<s>", "</s>" and "<unk>" are conventional
/// specials looked up by name.
class Vocabulary {
 public:
  Vocabulary();

  /// Adds a token if absent, returns its id either way.
  TokenId add(std::string_view token);

  /// Id of a token, or kNoToken if absent.
  TokenId find(std::string_view token) const;

  /// Id of a token; throws UnknownTokenError if absent.
  TokenId require(std::string_view token) const;

  const std::string& token(TokenId id) const;
  std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }
  bool contains(std::string_view token) const { return find(token) != kNoToken; }

  TokenId bos() const { return find("<s>"); }
  TokenId eos() const { return find("</s>"); }
  TokenId unk() const { return find("<unk>"); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  /// One token per line; line number - 1 is the id.  First line must be <eps>.
  static Vocabulary read_text(std::istream& in);
  void write_text(std::ostream& out) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Joins token ids as a space-separated string, skipping epsilon.
std::string join_tokens(const Vocabulary& vocab, const std::vector<TokenId>& ids);

/// Splits whitespace-separated tokens and resolves each against the vocabulary.
/// Unknown tokens map to <unk> when present, otherwise throw UnknownTokenError.
std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text);

/// Same resolution rule over an already-split token sequence.
std::vector<TokenId> tokenize(const Vocabulary& vocab,
                              const std::vector<std::string>& words);

}  // namespace convlat

#endif  // CONVLAT_VOCAB_HPP
