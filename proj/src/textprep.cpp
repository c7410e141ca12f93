#include "convlat/textprep.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace convlat {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream iss(text);
  std::string w;
  while (iss >> w) out.push_back(w);
  return out;
}

std::string tag_token_for(TagKind kind, const DialogueTurn& turn) {
  switch (kind) {
    case TagKind::sp:
      return "SP";
    case TagKind::sid:
      return "SID_" + turn.speaker;
    case TagKind::intent:
      if (turn.intent.empty())
        throw MissingIntentError(
            "intent tags requested but a turn carries no intent label");
      return "INT_" + turn.intent;
    case TagKind::none:
      break;
  }
  throw ConfigError("no junction token for tag kind 'none'");
}

DialogueCorpus corpus_from_conversations(
    const std::vector<Conversation>& convs) {
  DialogueCorpus corpus;
  for (const auto& conv : convs) {
    Dialogue d;
    for (const auto& u : conv.utterances)
      d.turns.push_back({u.speaker, u.intent, split_words(u.ref_text)});
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

std::vector<std::vector<std::string>> build_concat_corpus(
    const DialogueCorpus& corpus, const ConcatOptions& opts) {
  if (opts.k < 1) throw ConfigError("concat window size must be >= 1");
  std::vector<std::vector<std::string>> out;
  for (const auto& dialogue : corpus.dialogues) {
    const auto& turns = dialogue.turns;
    int m = static_cast<int>(turns.size());
    if (m == 0) continue;
    std::vector<std::vector<int>> windows;
    if (opts.cyclic) {
      for (int i = 0; i < m; ++i) {
        std::vector<int> w(static_cast<size_t>(opts.k));
        for (int j = 0; j < opts.k; ++j) w[static_cast<size_t>(j)] = (i + j) % m;
        windows.push_back(std::move(w));
      }
    } else {
      for (int i = 0; i < m; i += opts.k) {
        std::vector<int> w;
        for (int j = i; j < std::min(m, i + opts.k); ++j) w.push_back(j);
        windows.push_back(std::move(w));
      }
    }
    for (const auto& window : windows) {
      std::vector<std::string> seq;
      for (size_t j = 0; j < window.size(); ++j) {
        if (j > 0 && opts.tag != TagKind::none) {
          const DialogueTurn& side =
              turns[static_cast<size_t>(window[opts.tag_from_earlier ? j - 1 : j])];
          seq.push_back(tag_token_for(opts.tag, side));
        }
        const auto& words = turns[static_cast<size_t>(window[j])].words;
        seq.insert(seq.end(), words.begin(), words.end());
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

Vocabulary build_vocab(const DialogueCorpus& corpus,
                       const std::vector<TagKind>& tag_kinds) {
  Vocabulary vocab;
  vocab.add("<s>");
  vocab.add("</s>");
  vocab.add("<unk>");
  std::set<std::string> tags;
  for (TagKind kind : tag_kinds) {
    if (kind == TagKind::none) continue;
    if (kind == TagKind::sp) {
      tags.insert("SP");
      continue;
    }
    for (const auto& dialogue : corpus.dialogues)
      for (const auto& turn : dialogue.turns)
        if (kind != TagKind::intent || !turn.intent.empty())
          tags.insert(tag_token_for(kind, turn));
  }
  for (const auto& t : tags) vocab.add(t);
  for (const auto& dialogue : corpus.dialogues)
    for (const auto& turn : dialogue.turns)
      for (const auto& w : turn.words) vocab.add(w);
  return vocab;
}

std::vector<std::vector<TokenId>> corpus_to_ids(
    const std::vector<std::vector<std::string>>& corpus,
    const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(corpus.size());
  for (const auto& seq : corpus) out.push_back(tokenize(vocab, seq));
  return out;
}

}  // namespace convlat
