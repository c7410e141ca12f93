#ifndef CONVLAT_TEXTPREP_HPP
#define CONVLAT_TEXTPREP_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "convlat/conversation.hpp"
#include "convlat/errors.hpp"
#include "convlat/lattice.hpp"
#include "convlat/ngram_lm.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

enum class TagKind { none, sp, sid, intent };

struct DialogueTurn {
  std::string speaker;
  std::string intent;  // empty when unlabeled
  std::vector<std::string> words;
};

struct Dialogue {
  std::vector<DialogueTurn> turns;
};

struct DialogueCorpus {
  std::vector<Dialogue> dialogues;
};

std::vector<std::string> split_words(const std::string& text);

/// Junction token for a tag kind: "SP", "SID_<speaker>", "INT_<label>".
/// Throws MissingIntentError for the intent kind on an unlabeled turn.
std::string tag_token_for(TagKind kind, const DialogueTurn& turn);

/// Whitespace-tokenized turns grouped per conversation.
DialogueCorpus corpus_from_conversations(const std::vector<Conversation>& convs);

struct ConcatOptions {
  int k = 4;                 // utterances per training sequence
  TagKind tag = TagKind::none;
  bool cyclic = true;        // false: disjoint consecutive blocks
  bool tag_from_earlier = true;  // which side of a junction names the tag
};

/// Training sequences per the options: windows of k consecutive turns joined
/// with one junction tag between adjacent turns.  Cyclic mode emits one
/// window per turn, wrapping past the dialogue end; block mode emits
/// disjoint runs (the last may be short).  k = 1 reproduces the corpus.
std::vector<std::vector<std::string>> build_concat_corpus(
    const DialogueCorpus& corpus, const ConcatOptions& opts);

/// Stable vocabulary over the corpus: <eps>, <s>, </s>, <unk>, then junction
/// tokens for the requested kinds (sorted), then words in first appearance
/// order.
Vocabulary build_vocab(const DialogueCorpus& corpus,
                       const std::vector<TagKind>& tag_kinds);

/// Maps string sequences to ids, resolving unknowns per `tokenize`.
std::vector<std::vector<TokenId>> corpus_to_ids(
    const std::vector<std::vector<std::string>>& corpus,
    const Vocabulary& vocab);

struct SynthConfig {
  int train_dialogues = 60;
  int eval_dialogues = 30;
  int utterances_per_dialogue = 8;
  int carrier_words = 40;
  int num_entities = 12;     // paired into confusable halves
  int num_fillers = 8;       // paired; used for benign mid-utterance branches
  int carrier_min = 3, carrier_max = 6;
  double entity_repeat_prob = 0.6;
  double filler_slot_prob = 0.5;
  /// Acoustic margin favoring the wrong entity on repeated mentions; the
  /// cross-utterance LM cue must exceed it for a fix.
  double repeat_margin_lo = 0.5, repeat_margin_hi = 1.0;
  /// Margin favoring the reference on fresh mentions and filler branches.
  double safe_margin_lo = 1.5, safe_margin_hi = 2.5;
  double filler_margin = 3.0;
  std::uint64_t seed = 1;
  std::vector<std::string> intents{"ask", "answer", "confirm"};
};

/// A deterministic conversational dataset: reference texts with recurring
/// sentence-final entities, plus per-utterance first-pass lattices whose
/// graph costs are exactly the add-one bigram scores of the training
/// references (order 2), so rescoring's subtraction cancels them.  Every
/// lattice contains its reference path; repeated entity mentions carry an
/// acoustic margin toward the paired wrong entity, fresh mentions and filler
/// branches carry safe margins toward the reference.
struct SynthDataset {
  std::shared_ptr<Vocabulary> vocab;
  DialogueCorpus train;
  DialogueCorpus eval;
  /// The order-2 model the eval lattices' graph costs were taken from;
  /// retrainable from `train` but exposed so callers subtract the same model.
  NgramModel first_pass_lm;
  std::vector<Conversation> conversations;  // eval side, lattice_path keys
  std::vector<Lattice> lattices;
  std::unordered_map<std::string, size_t> lattice_index;  // by lattice_path
};

SynthDataset generate_synthetic_conversations(const SynthConfig& config);

}  // namespace convlat

#endif  // CONVLAT_TEXTPREP_HPP
