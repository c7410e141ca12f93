#ifndef CONVLAT_LATTICE_HPP
#define CONVLAT_LATTICE_HPP

#include <iosfwd>
#include <limits>
#include <vector>

#include "convlat/errors.hpp"
#include "convlat/vocab.hpp"

namespace convlat {

constexpr double kInfCost = std::numeric_limits<double>::infinity();

/// Paired log-domain arc cost (negative natural logs, Kaldi convention).
/// The graph part carries LM and transition scores; rescoring edits only it.
/// Ranking combines the two as lm_scale * graph + acoustic.
struct Cost {
  double graph = 0.0;
  double acoustic = 0.0;

  double combined(double lm_scale) const { return lm_scale * graph + acoustic; }
  bool operator==(const Cost&) const = default;
};

struct Arc {
  StateId src = 0;
  StateId dst = 0;
  TokenId word = kEpsToken;
  Cost cost;
};

struct ValidationReport {
  bool acyclic = false;
  bool connected = false;
  bool epsilon_free = false;
  int num_states = 0;
  int num_arcs = 0;
  int num_finals = 0;
};

/// Viterbi forward/backward costs over a lattice.  alpha[s] is the best cost
/// from the start to s (arcs only); beta[s] is the best cost from s to a final,
/// final costs included (graph-side, so scaled by lm_scale).  The best total
/// path cost is beta[start].
struct PathCosts {
  std::vector<double> alpha;
  std::vector<double> beta;
  double total = kInfCost;
};

/// Acyclic weighted word lattice.  Built by add_state/add_arc/set_final, then
/// frozen by validate(); all queries require a validated lattice.  Validated
/// lattices are immutable and safe to share across threads.
class Lattice {
 public:
  StateId add_state();
  /// Adds n states, returns the id of the first.
  StateId add_states(int n);
  void add_arc(const Arc& arc);
  void set_start(StateId s);
  void set_final(StateId s, double cost);

  int num_states() const { return static_cast<int>(final_.size()); }
  int num_arcs() const { return static_cast<int>(arcs_.size()); }
  StateId start() const { return start_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  bool is_final(StateId s) const { return final_[static_cast<size_t>(s)] != kInfCost; }
  double final_cost(StateId s) const { return final_[static_cast<size_t>(s)]; }
  /// Final states in ascending id order.
  std::vector<StateId> final_states() const;

  /// Checks acyclicity, single connected structure and (by default)
  /// epsilon-freeness of arc labels; caches the topological order.
  /// Throws CyclicLatticeError / UnreachableStateError / NoFinalStateError /
  /// InvalidLatticeError on violation.
  ValidationReport validate(bool allow_epsilon = false);

  bool validated() const { return validated_; }
  const std::vector<StateId>& topo_order() const;
  /// Indices into arcs() leaving state s, in insertion order.
  const std::vector<int>& out_arcs(StateId s) const;

 private:
  void check_state(StateId s) const;
  void require_mutable() const;
  void require_validated() const;

  std::vector<Arc> arcs_;
  std::vector<double> final_;  // kInfCost where not final
  StateId start_ = -1;
  bool validated_ = false;
  std::vector<StateId> topo_;
  std::vector<std::vector<int>> out_;
};

/// Keeps only states on some start-to-final path, renumbering survivors in
/// ascending old-id order.  The result is unvalidated.
Lattice connect(const Lattice& lattice);

/// Viterbi forward/backward costs at the given LM scale (lm_scale > 0).
PathCosts forward_backward(const Lattice& lattice, double lm_scale);

struct BestPath {
  std::vector<TokenId> words;          // epsilon labels dropped
  std::vector<int> arc_indices;        // arcs of the chosen path, in order
  StateId end_state = -1;
  double cost = kInfCost;              // includes scaled final cost
};

/// Minimum-cost path.  Ties on exact cost equality are broken toward the
/// lexicographically smaller (epsilon-stripped) token id sequence.
BestPath best_path(const Lattice& lattice, double lm_scale);

/// Number of distinct start-to-final paths, saturating at cap.
long long count_paths(const Lattice& lattice, long long cap = 1LL << 40);

struct LatticeReadOptions {
  bool allow_epsilon = false;   // accept <eps>-labeled arcs
  bool map_oov_to_unk = true;   // resolve unknown words to <unk> when present
};

/// Line-oriented text format:
///   arc:   <src> <dst> <word> <graph>,<acoustic>
///   final: <state> <final_cost>
/// The first state mentioned is the start state.  The returned lattice is
/// validated.
Lattice read_lattice_text(std::istream& in, const Vocabulary& vocab,
                          const LatticeReadOptions& opts = {});

/// Inverse of read_lattice_text, canonical form: arcs grouped by source in
/// topological order (start first), then finals; shortest round-trip floats.
void write_lattice_text(const Lattice& lattice, const Vocabulary& vocab,
                        std::ostream& out);

Lattice read_lattice_file(const std::string& path, const Vocabulary& vocab,
                          const LatticeReadOptions& opts = {});
void write_lattice_file(const Lattice& lattice, const Vocabulary& vocab,
                        const std::string& path);

}  // namespace convlat

#endif  // CONVLAT_LATTICE_HPP
