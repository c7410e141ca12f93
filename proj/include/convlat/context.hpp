#ifndef CONVLAT_CONTEXT_HPP
#define CONVLAT_CONTEXT_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "convlat/conversation.hpp"
#include "convlat/errors.hpp"
#include "convlat/lattice.hpp"
#include "convlat/rescore.hpp"
#include "convlat/sequence_lm.hpp"
#include "convlat/textprep.hpp"
#include "convlat/tfidf.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

/// A junction label between two concatenated utterances.
struct TagWord {
  TagKind kind = TagKind::none;
  TokenId token = kEpsToken;
};

/// Joins two validated lattices into one whose paths are exactly
/// {prev path + tag + cur path}, cost-additive: each final f of prev loses
/// its final status and instead emits a tag arc with graph cost equal to
/// prev's final cost (acoustic 0).  Each tag arc enters a private copy of
/// cur's first max(n-1, 1) state layers (breadth-first arc distance from
/// cur's start), so the last n-1 words of history stay distinguishable
/// across the junction; deeper layers are shared between all prev finals.
/// Copied layers keep any final status cur gave them.  The result is
/// connected and validated.  Throws InvalidLatticeError on unvalidated
/// inputs, VocabMismatchError when the tag token is outside the vocabulary,
/// and CycleCreatedError should validation detect a cycle.
Lattice concat_lattices(const Lattice& prev, const Lattice& cur, TagWord tag,
                        int n, const Vocabulary& vocab);

enum class ExtractMode { best_path_suffix, sublattice };

/// The part of a best path after the last junction arc.  `cost` sums the
/// post-junction arc costs; `final_cost` is the path-end final cost
/// (graph side, unscaled).
struct ExtractResult {
  std::vector<TokenId> words;    // epsilon stripped
  std::vector<int> arc_indices;  // into lattice.arcs()
  Cost cost;
  double final_cost = 0.0;
  /// sublattice mode only: the whole post-junction region as a lattice.
  /// Its fresh start state reaches each junction head through an epsilon arc
  /// carrying the (graph, acoustic) decomposition of the best prefix ending
  /// there, junction arc included, so best paths and ranking costs agree
  /// with the composed lattice.
  Lattice region;
  bool has_region = false;
};

/// Splits a rescored concatenation at its junction arcs (any arc whose word
/// is in tag_tokens).  The best-path fields always refer to the last
/// junction arc on the best path; with chained junctions the sublattice
/// region instead spans everything after the first junction on each path.
/// Throws TagNotFoundError when the lattice has no junction arc.
ExtractResult extract_context_region(
    const Lattice& lattice, const std::vector<TokenId>& tag_tokens,
    double lm_scale, ExtractMode mode = ExtractMode::best_path_suffix);

struct ConcatPolicy {
  TagKind tag = TagKind::none;  // none: never concatenate
  /// Similarity gate: concatenate when similarity > tau; nullopt always
  /// concatenates.  tau >= 1 therefore never fires.
  std::optional<double> tau;
  /// How many preceding utterances to chain in front of the current one.
  int context_depth = 1;
};

struct GateDecision {
  bool concat = false;
  double similarity = 0.0;
};

/// Similarity between the previous hypothesis and the current first-pass
/// hypothesis, and whether the policy concatenates at that similarity.
GateDecision should_concat(const std::vector<TokenId>& prev_hyp,
                           const std::vector<TokenId>& cur_hyp,
                           const TfIdfModel& model, const ConcatPolicy& policy);

/// Conversation-level rescoring.  First pass: best paths of every utterance
/// lattice feed the document-frequency model.  Second pass, per conversation
/// in utterance order: the current lattice, optionally concatenated behind up
/// to context_depth previous first-pass lattices (junction tags named by the
/// earlier utterance), is rescored and the post-junction region becomes the
/// hypothesis.  The first utterance of a conversation is always rescored
/// alone; similarity is reported for every later one, gated or not.
///
/// lattice_by_path must return validated lattices and, with jobs > 1, be safe
/// to call concurrently.  Conversations are distributed over jobs threads;
/// each conversation is processed sequentially, so results do not depend on
/// jobs.  Per-utterance rescoring stats arrive in output order when `stats`
/// is given.
std::vector<HypRecord> rescore_with_context(
    const std::vector<Conversation>& convs,
    const std::function<const Lattice&(const std::string&)>& lattice_by_path,
    const DifferenceLm& lm, const Vocabulary& vocab, const ConcatPolicy& policy,
    int n, double beam, double lm_scale, int jobs = 1,
    std::vector<RescoreStats>* stats = nullptr);

}  // namespace convlat

#endif  // CONVLAT_CONTEXT_HPP
