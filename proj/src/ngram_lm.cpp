#include "convlat/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace convlat {

namespace {

constexpr double kLn10 = 2.302585092994045684;
constexpr double kDummyLog10 = -99.0;  // conventional "never predicted"

std::vector<TokenId> suffix(const std::vector<TokenId>& seq, size_t max_len) {
  if (seq.size() <= max_len) return seq;
  return std::vector<TokenId>(seq.end() - static_cast<long>(max_len), seq.end());
}

}  // namespace

TokenId NgramModel::map_word(TokenId word) const {
  std::vector<TokenId> uni{word};
  if (entries_.count(uni)) return word;
  if (unk_ != kNoToken && entries_.count(std::vector<TokenId>{unk_})) return unk_;
  throw UnknownTokenError("word has no unigram and model has no <unk>: " +
                          (vocab_ ? vocab_->token(word) : std::to_string(word)));
}

double NgramModel::backoff_cost_of(const std::vector<TokenId>& context) const {
  auto it = entries_.find(context);
  return it == entries_.end() ? 0.0 : it->second.backoff_cost;
}

double NgramModel::raw_cost(const std::vector<TokenId>& context,
                            TokenId word) const {
  std::vector<TokenId> ctx = suffix(context, static_cast<size_t>(order_ - 1));
  double backoff = 0.0;
  while (true) {
    std::vector<TokenId> gram = ctx;
    gram.push_back(word);
    auto it = entries_.find(gram);
    if (it != entries_.end()) return backoff + it->second.cost;
    if (ctx.empty())
      throw UnknownTokenError("no unigram entry for token id " +
                              std::to_string(word));
    backoff += backoff_cost_of(ctx);
    ctx.erase(ctx.begin());
  }
}

NgramStateId NgramModel::begin_state() const {
  NgramStateId s;
  if (bos_ != kNoToken) s.history.push_back(bos_);
  // Truncate to the longest known context.
  while (!s.history.empty() &&
         (s.history.size() > static_cast<size_t>(order_ - 1) ||
          !entries_.count(s.history)))
    s.history.erase(s.history.begin());
  return s;
}

std::pair<double, NgramStateId> NgramModel::score_word(const NgramStateId& state,
                                                       TokenId word) const {
  if (word == kEpsToken) return {0.0, state};  // zero-length for history
  TokenId w = map_word(word);
  double cost = raw_cost(state.history, w);
  NgramStateId next;
  next.history = state.history;
  next.history.push_back(w);
  next.history = suffix(next.history, static_cast<size_t>(order_ - 1));
  while (!next.history.empty() && !entries_.count(next.history))
    next.history.erase(next.history.begin());
  return {cost, std::move(next)};
}

double NgramModel::end_cost(const NgramStateId& state) const {
  if (eos_ == kNoToken) throw ConfigError("model vocabulary lacks </s>");
  return raw_cost(state.history, eos_);
}

double NgramModel::score_sentence(const std::vector<TokenId>& words) const {
  NgramStateId state = begin_state();
  double total = 0.0;
  for (TokenId w : words) {
    auto [cost, next] = score_word(state, w);
    total += cost;
    state = std::move(next);
  }
  return total + end_cost(state);
}

std::vector<std::vector<TokenId>> NgramModel::explicit_histories() const {
  std::vector<std::vector<TokenId>> out;
  out.emplace_back();  // the empty context backs every distribution
  for (const auto& [gram, entry] : entries_)
    if (gram.size() < static_cast<size_t>(order_)) out.push_back(gram);
  std::sort(out.begin(), out.end());
  return out;
}

bool NgramModel::has_entry(const std::vector<TokenId>& gram) const {
  return entries_.count(gram) != 0;
}

const NgramModel::Entry* NgramModel::find_entry(
    const std::vector<TokenId>& gram) const {
  auto it = entries_.find(gram);
  return it == entries_.end() ? nullptr : &it->second;
}

void NgramModel::patch_missing_prefixes(bool strict) {
  std::vector<std::vector<TokenId>> keys;
  for (const auto& [gram, entry] : entries_)
    if (gram.size() >= 2) keys.push_back(gram);
  std::sort(keys.begin(), keys.end());
  for (const auto& gram : keys) {
    std::vector<TokenId> prefix(gram.begin(), gram.end() - 1);
    while (!prefix.empty() && !entries_.count(prefix)) {
      if (strict)
        throw ParseError("missing prefix n-gram for a higher-order entry");
      std::vector<TokenId> ctx(prefix.begin(), prefix.end() - 1);
      Entry e;
      e.cost = raw_cost(ctx, prefix.back());
      e.backoff_cost = 0.0;
      e.has_backoff = false;
      entries_.emplace(prefix, e);
      prefix.pop_back();
    }
  }
}

NgramModel NgramModel::load_arpa(std::istream& in, const Vocabulary& vocab) {
  return load_arpa(in, vocab, LoadOptions{});
}

NgramModel NgramModel::load_arpa(std::istream& in, const Vocabulary& vocab,
                                 const LoadOptions& opts) {
  NgramModel model;
  model.vocab_ = &vocab;
  model.bos_ = vocab.bos();
  model.eos_ = vocab.eos();
  model.unk_ = vocab.unk();

  std::map<int, long> declared;
  std::string line;
  int line_no = 0;
  bool in_data = false, saw_end = false;
  int cur_order = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  while (next_line()) {
    if (line.find("\\data\\") != std::string::npos) {
      in_data = true;
      break;
    }
  }
  if (!in_data) throw ParseError("ARPA input has no \\data\\ section");

  while (next_line()) {
    if (line.empty()) continue;
    if (line.rfind("ngram", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("bad ngram count", line_no);
      int k = 0;
      long c = 0;
      try {
        k = std::stoi(line.substr(5, eq - 5));
        c = std::stol(line.substr(eq + 1));
      } catch (const std::exception&) {
        throw ParseError("bad ngram count", line_no);
      }
      declared[k] = c;
      model.order_ = std::max(model.order_, k);
    } else {
      break;  // first section header
    }
  }
  if (model.order_ < 1) throw ParseError("ARPA declares no n-gram orders");

  std::map<int, long> parsed;
  while (true) {
    if (line.find("\\end\\") != std::string::npos) {
      saw_end = true;
      break;
    }
    if (!line.empty() && line[0] == '\\') {
      auto dash = line.find("-grams:");
      if (dash == std::string::npos)
        throw ParseError("unexpected section header: " + line, line_no);
      try {
        cur_order = std::stoi(line.substr(1, dash - 1));
      } catch (const std::exception&) {
        throw ParseError("unexpected section header: " + line, line_no);
      }
      if (cur_order < 1 || cur_order > model.order_)
        throw ParseError("section order out of range", line_no);
    } else if (!line.empty()) {
      std::istringstream iss(line);
      double logprob;
      if (!(iss >> logprob)) throw ParseError("bad logprob", line_no);
      std::vector<TokenId> gram;
      for (int i = 0; i < cur_order; ++i) {
        std::string w;
        if (!(iss >> w)) throw ParseError("too few words in n-gram", line_no);
        gram.push_back(vocab.require(w));
      }
      Entry e;
      e.cost = -logprob * kLn10;
      double bow;
      if (iss >> bow) {
        e.backoff_cost = -bow * kLn10;
        e.has_backoff = true;
      }
      model.entries_[gram] = e;
      ++parsed[cur_order];
    }
    if (!next_line()) break;
  }
  if (!saw_end) throw ParseError("ARPA input has no \\end\\ marker");

  for (const auto& [k, c] : declared) {
    if (parsed[k] != c) {
      std::string msg = "ARPA count mismatch for order " + std::to_string(k) +
                        ": declared " + std::to_string(c) + ", parsed " +
                        std::to_string(parsed[k]);
      if (opts.strict) throw CountMismatchError(msg);
      std::cerr << "warning: " << msg << "\n";
    }
  }

  model.patch_missing_prefixes(opts.strict);
  return model;
}

void NgramModel::write_arpa(std::ostream& out) const {
  out << std::setprecision(17);
  std::map<int, std::vector<std::vector<TokenId>>> by_order;
  for (const auto& [gram, entry] : entries_)
    by_order[static_cast<int>(gram.size())].push_back(gram);
  out << "\\data\\\n";
  for (int k = 1; k <= order_; ++k)
    out << "ngram " << k << "=" << by_order[k].size() << "\n";
  for (int k = 1; k <= order_; ++k) {
    auto& grams = by_order[k];
    std::sort(grams.begin(), grams.end());
    out << "\n\\" << k << "-grams:\n";
    for (const auto& gram : grams) {
      const Entry& e = entries_.at(gram);
      out << (-e.cost / kLn10);
      for (TokenId t : gram) out << ' ' << vocab_->token(t);
      if (e.has_backoff) out << ' ' << (-e.backoff_cost / kLn10);
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
}

NgramModel train_addone_ngram(const std::vector<std::vector<TokenId>>& corpus,
                              int order, const Vocabulary& vocab) {
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  TokenId bos = vocab.bos(), eos = vocab.eos();
  if (bos == kNoToken || eos == kNoToken)
    throw ConfigError("vocabulary must contain <s> and </s>");

  // Predictable word set: everything except <eps> and <s>.
  std::vector<TokenId> predictable;
  for (TokenId t = 0; t < vocab.size(); ++t)
    if (t != kEpsToken && t != bos) predictable.push_back(t);
  double v_size = static_cast<double>(predictable.size());

  // Raw k-gram counts over <s>-padded sentences, k = 1..order.
  std::unordered_map<std::vector<TokenId>, long, NgramModel::KeyHash> counts;
  for (const auto& sent : corpus) {
    std::vector<TokenId> padded;
    padded.push_back(bos);
    for (TokenId w : sent)
      if (w != kEpsToken) padded.push_back(w);
    padded.push_back(eos);
    for (size_t i = 0; i < padded.size(); ++i) {
      for (int k = 1; k <= order; ++k) {
        if (i + static_cast<size_t>(k) > padded.size()) break;
        std::vector<TokenId> gram(padded.begin() + static_cast<long>(i),
                                  padded.begin() + static_cast<long>(i) + k);
        if (k == 1 && gram[0] == bos) continue;  // <s> is never predicted
        ++counts[gram];
      }
    }
  }

  NgramModel model;
  model.vocab_ = &vocab;
  model.order_ = order;
  model.bos_ = bos;
  model.eos_ = eos;
  model.unk_ = vocab.unk();

  // Level 1: add-one unigrams over the predictable set, plus the <s> dummy.
  long total = 0;
  for (TokenId w : predictable) {
    std::vector<TokenId> uni{w};
    auto it = counts.find(uni);
    total += (it == counts.end() ? 0 : it->second);
  }
  for (TokenId w : predictable) {
    std::vector<TokenId> uni{w};
    auto it = counts.find(uni);
    long c = (it == counts.end() ? 0 : it->second);
    NgramModel::Entry e;
    e.cost = -std::log((static_cast<double>(c) + 1.0) /
                       (static_cast<double>(total) + v_size));
    model.entries_[uni] = e;
  }
  if (order > 1) {
    NgramModel::Entry dummy_bos;
    dummy_bos.cost = -kDummyLog10 * kLn10;
    model.entries_[{bos}] = dummy_bos;
  }

  // Levels 2..order: add-one conditionals for observed grams, then Katz
  // backoff weights for their contexts so each history normalizes exactly.
  for (int k = 2; k <= order; ++k) {
    std::vector<std::vector<TokenId>> grams;
    for (const auto& [gram, c] : counts)
      if (static_cast<int>(gram.size()) == k) grams.push_back(gram);
    std::sort(grams.begin(), grams.end());

    std::unordered_map<std::vector<TokenId>, long, NgramModel::KeyHash> ctx_total;
    for (const auto& gram : grams) {
      std::vector<TokenId> ctx(gram.begin(), gram.end() - 1);
      ctx_total[ctx] += counts.at(gram);
    }
    for (const auto& gram : grams) {
      std::vector<TokenId> ctx(gram.begin(), gram.end() - 1);
      double c = static_cast<double>(counts.at(gram));
      double denom = static_cast<double>(ctx_total.at(ctx)) + v_size;
      NgramModel::Entry e;
      e.cost = -std::log((c + 1.0) / denom);
      model.entries_[gram] = e;
    }
    // Backoff weight per context with observed continuations.
    std::vector<std::vector<TokenId>> contexts;
    for (const auto& [ctx, t] : ctx_total) contexts.push_back(ctx);
    std::sort(contexts.begin(), contexts.end());
    for (const auto& ctx : contexts) {
      double p_explicit = 0.0, p_lower = 0.0;
      for (TokenId w : predictable) {
        std::vector<TokenId> gram = ctx;
        gram.push_back(w);
        if (!counts.count(gram)) continue;
        p_explicit += std::exp(-model.entries_.at(gram).cost);
        std::vector<TokenId> sub(ctx.begin() + 1, ctx.end());
        p_lower += std::exp(-model.raw_cost(sub, w));
      }
      double num = 1.0 - p_explicit, den = 1.0 - p_lower;
      double alpha = (den > 1e-12) ? num / den : 1.0;
      auto it = model.entries_.find(ctx);
      if (it == model.entries_.end())
        throw ConfigError("internal: context without entry while training");
      it->second.backoff_cost = -std::log(alpha);
      it->second.has_backoff = true;
    }
  }
  return model;
}

}  // namespace convlat
