#ifndef CONVLAT_RESCORE_HPP
#define CONVLAT_RESCORE_HPP

#include "convlat/lattice.hpp"
#include "convlat/sequence_lm.hpp"

namespace convlat {

struct RescoreOptions {
  /// Words of LM history kept per composed state (the approximation order
  /// minus one).  Negative keeps unbounded histories: exact composition.
  int history_limit = 3;
  /// Ranking-cost beam around the best complete path found so far; +inf
  /// disables pruning.  Pruning never activates before the first complete
  /// path, so any beam >= 0 yields a non-empty result.
  double beam = kInfCost;
  double lm_scale = 1.0;
  /// Hard cap on expansion events before ExpansionBudgetError.
  long max_expansions = 10000000;
  /// How often one composed state may be re-queued after a better arrival.
  int max_reexpansions = 3;
};

struct RescoreStats {
  long states_expanded = 0;
  long states_pruned = 0;
  long reexpansions = 0;
  long composed_states = 0;
};

/// graph' = graph - old + new; acoustic untouched.
inline Cost replace_lm_cost(const Cost& cost, double old_lm_cost,
                            double new_lm_cost) {
  return {cost.graph - old_lm_cost + new_lm_cost, cost.acoustic};
}

/// Best-first composition of a validated lattice with a difference LM.
/// Composed states are (lattice state, last history_limit words); the LM
/// states attached to a merged composed state are the ones from its
/// lowest-cost arrival.  Expansion order follows the heuristic
/// alpha(c) + beta(a) + delta(c), where beta comes from the input lattice
/// and delta is refined lazily as successors finalize.  The result keeps
/// only states on surviving start-to-final paths.
Lattice rescore_compose(const Lattice& lattice, const DifferenceLm& lm,
                        const RescoreOptions& opts,
                        RescoreStats* stats = nullptr);

/// Unbounded histories; guarded by an expansion budget since the composed
/// lattice can grow with the path count.
Lattice rescore_exact(const Lattice& lattice, const DifferenceLm& lm,
                      double lm_scale = 1.0, long max_expansions = 100000,
                      RescoreStats* stats = nullptr);

/// Histories merged beyond the last n-1 words; no pruning.
Lattice rescore_ngram_approx(const Lattice& lattice, const DifferenceLm& lm,
                             double lm_scale, int n,
                             RescoreStats* stats = nullptr);

/// Merged histories plus beam pruning around the best finished path.
Lattice rescore_pruned(const Lattice& lattice, const DifferenceLm& lm,
                       double lm_scale, int n, double beam,
                       RescoreStats* stats = nullptr);

}  // namespace convlat

#endif  // CONVLAT_RESCORE_HPP
