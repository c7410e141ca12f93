#include "convlat/vocab.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace convlat {

Vocabulary::Vocabulary() { add("<eps>"); }

TokenId Vocabulary::add(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  TokenId id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

TokenId Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kNoToken : it->second;
}

TokenId Vocabulary::require(std::string_view token) const {
  TokenId id = find(token);
  if (id == kNoToken)
    throw UnknownTokenError("token not in vocabulary: " + std::string(token));
  return id;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size())
    throw UnknownTokenError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::read_text(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "<eps>")
        throw ParseError("vocabulary must start with <eps>", line_no);
      continue;
    }
    if (line.empty()) throw ParseError("empty vocabulary line", line_no);
    if (vocab.contains(line)) throw ParseError("duplicate token: " + line, line_no);
    vocab.add(line);
  }
  if (line_no == 0) throw ParseError("empty vocabulary file");
  return vocab;
}

void Vocabulary::write_text(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

std::string join_tokens(const Vocabulary& vocab, const std::vector<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEpsToken) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

namespace {

TokenId resolve_token(const Vocabulary& vocab, const std::string& tok) {
  TokenId id = vocab.find(tok);
  if (id == kNoToken) {
    id = vocab.unk();
    if (id == kNoToken)
      throw UnknownTokenError("token not in vocabulary and no <unk>: " + tok);
  }
  return id;
}

}  // namespace

std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  std::istringstream iss{std::string(text)};
  std::string tok;
  while (iss >> tok) ids.push_back(resolve_token(vocab, tok));
  return ids;
}

std::vector<TokenId> tokenize(const Vocabulary& vocab,
                              const std::vector<std::string>& words) {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(resolve_token(vocab, w));
  return ids;
}

}  // namespace convlat
