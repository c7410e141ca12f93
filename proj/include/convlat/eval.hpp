#ifndef CONVLAT_EVAL_HPP
#define CONVLAT_EVAL_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "convlat/context.hpp"
#include "convlat/conversation.hpp"
#include "convlat/errors.hpp"
#include "convlat/lattice.hpp"
#include "convlat/sequence_lm.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

/// Token error counts from a minimum-edit alignment.  Ties prefer
/// substitution over deletion over insertion; the total S+I+D always equals
/// the edit distance.  cer is undefined (and left 0) for an empty reference.
struct CerReport {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long ref_len = 0;
  double cer = 0.0;
  bool cer_defined = false;
};

CerReport cer(const std::vector<TokenId>& ref, const std::vector<TokenId>& hyp);

/// Sums counts over utterances, recomputing the pooled rate.
CerReport pool_cer(const std::vector<CerReport>& parts);

struct OraclePath {
  std::vector<TokenId> words;    // epsilon stripped
  std::vector<int> arc_indices;  // into lattice.arcs()
  double graph_cost = 0.0;       // rescored, final cost included
  double acoustic_cost = 0.0;
  double total_cost = kInfCost;  // lm_scale * graph + acoustic
};

/// Reference answer for rescoring: enumerates every path, scores each with
/// the difference LM exactly, and returns the ranking-best one (ties toward
/// the lexicographically smaller word sequence, as best_path breaks them).
/// Throws BudgetExceededError when the lattice has more than `budget` paths.
OraclePath oracle_rescore_nbest(const Lattice& lattice, const DifferenceLm& lm,
                                double lm_scale, long long budget = 200000);

using LatticeProvider = std::function<const Lattice&(const std::string&)>;

struct GridCondition {
  std::string name;
  ConcatPolicy policy;
  bool first_pass_only = false;      // report 1-best paths, no rescoring
  const DifferenceLm* lm = nullptr;  // required unless first_pass_only
};

struct GridSpec {
  std::vector<GridCondition> conditions;
  int n = 4;
  double beam = 15.0;
  double lm_scale = 1.0;
  int jobs = 1;
};

struct GridRow {
  std::string name;
  long utterances = 0;
  long concatenated = 0;
  CerReport pooled;
  /// Relative error reduction against the rows named "first_pass" / "plain";
  /// 0 when the baseline is absent or has no errors.
  double rel_vs_first_pass = 0.0;
  double rel_vs_plain = 0.0;
  std::vector<HypRecord> hyps;  // conversation order, then utterance order
};

struct GridReport {
  std::vector<GridRow> rows;
};

/// Runs every condition over the same conversations and scores hypotheses
/// against the reference texts.
GridReport run_grid(const std::vector<Conversation>& convs,
                    const LatticeProvider& lattice_by_path,
                    const Vocabulary& vocab, const GridSpec& spec);

void write_grid_report_json(const GridReport& report, std::ostream& out);
void write_grid_report_tsv(const GridReport& report, std::ostream& out);
/// JSON Lines: every hypothesis of every condition, tagged with its
/// condition name.
void write_grid_hyps(const GridReport& report, std::ostream& out);

}  // namespace convlat

#endif  // CONVLAT_EVAL_HPP
