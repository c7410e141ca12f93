#include "convlat/lattice.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <queue>

namespace convlat {

StateId Lattice::add_state() {
  require_mutable();
  final_.push_back(kInfCost);
  out_.emplace_back();
  StateId id = static_cast<StateId>(final_.size()) - 1;
  if (start_ < 0) start_ = id;
  return id;
}

StateId Lattice::add_states(int n) {
  StateId first = -1;
  for (int i = 0; i < n; ++i) {
    StateId s = add_state();
    if (i == 0) first = s;
  }
  return first;
}

void Lattice::add_arc(const Arc& arc) {
  require_mutable();
  check_state(arc.src);
  check_state(arc.dst);
  if (arc.src == arc.dst)
    throw CyclicLatticeError("self-loop on state " + std::to_string(arc.src));
  out_[static_cast<size_t>(arc.src)].push_back(static_cast<int>(arcs_.size()));
  arcs_.push_back(arc);
}

void Lattice::set_start(StateId s) {
  require_mutable();
  check_state(s);
  start_ = s;
}

void Lattice::set_final(StateId s, double cost) {
  require_mutable();
  check_state(s);
  final_[static_cast<size_t>(s)] = cost;
}

std::vector<StateId> Lattice::final_states() const {
  std::vector<StateId> out;
  for (StateId s = 0; s < num_states(); ++s)
    if (is_final(s)) out.push_back(s);
  return out;
}

void Lattice::check_state(StateId s) const {
  if (s < 0 || s >= num_states())
    throw InvalidLatticeError("state id out of range: " + std::to_string(s));
}

void Lattice::require_mutable() const {
  if (validated_) throw InvalidLatticeError("lattice is frozen after validation");
}

void Lattice::require_validated() const {
  if (!validated_) throw InvalidLatticeError("lattice not validated");
}

ValidationReport Lattice::validate(bool allow_epsilon) {
  ValidationReport report;
  report.num_states = num_states();
  report.num_arcs = num_arcs();
  if (num_states() == 0 || start_ < 0)
    throw InvalidLatticeError("lattice has no start state");

  // Kahn topological sort; leftover in-degree means a cycle.  The smallest
  // ready state goes first, so the order depends only on the graph, not on
  // arc insertion order; the canonical text writer relies on that.
  std::vector<int> indeg(static_cast<size_t>(num_states()), 0);
  for (const Arc& a : arcs_) ++indeg[static_cast<size_t>(a.dst)];
  std::vector<StateId> order;
  order.reserve(static_cast<size_t>(num_states()));
  std::priority_queue<StateId, std::vector<StateId>, std::greater<StateId>>
      ready;
  for (StateId s = 0; s < num_states(); ++s)
    if (indeg[static_cast<size_t>(s)] == 0) ready.push(s);
  while (!ready.empty()) {
    StateId s = ready.top();
    ready.pop();
    order.push_back(s);
    for (int ai : out_[static_cast<size_t>(s)]) {
      StateId d = arcs_[static_cast<size_t>(ai)].dst;
      if (--indeg[static_cast<size_t>(d)] == 0) ready.push(d);
    }
  }
  if (static_cast<int>(order.size()) != num_states())
    throw CyclicLatticeError("lattice contains a cycle");
  report.acyclic = true;

  int num_finals = 0;
  for (StateId s = 0; s < num_states(); ++s)
    if (is_final(s)) ++num_finals;
  report.num_finals = num_finals;
  if (num_finals == 0) throw NoFinalStateError("lattice has no final state");

  // Reachability from start and co-reachability to a final.
  std::vector<char> fwd(static_cast<size_t>(num_states()), 0);
  fwd[static_cast<size_t>(start_)] = 1;
  for (StateId s : order)
    if (fwd[static_cast<size_t>(s)])
      for (int ai : out_[static_cast<size_t>(s)])
        fwd[static_cast<size_t>(arcs_[static_cast<size_t>(ai)].dst)] = 1;
  std::vector<char> bwd(static_cast<size_t>(num_states()), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    StateId s = *it;
    if (is_final(s)) bwd[static_cast<size_t>(s)] = 1;
    for (int ai : out_[static_cast<size_t>(s)])
      if (bwd[static_cast<size_t>(arcs_[static_cast<size_t>(ai)].dst)])
        bwd[static_cast<size_t>(s)] = 1;
  }
  for (StateId s = 0; s < num_states(); ++s) {
    if (!fwd[static_cast<size_t>(s)])
      throw UnreachableStateError("state " + std::to_string(s) +
                                  " unreachable from start");
    if (!bwd[static_cast<size_t>(s)])
      throw UnreachableStateError("state " + std::to_string(s) +
                                  " cannot reach a final state");
  }
  report.connected = true;

  report.epsilon_free = true;
  for (const Arc& a : arcs_)
    if (a.word == kEpsToken) report.epsilon_free = false;
  if (!allow_epsilon && !report.epsilon_free)
    throw InvalidLatticeError("epsilon arc label in epsilon-free lattice");

  topo_ = std::move(order);
  validated_ = true;
  return report;
}

const std::vector<StateId>& Lattice::topo_order() const {
  require_validated();
  return topo_;
}

const std::vector<int>& Lattice::out_arcs(StateId s) const {
  require_validated();
  check_state(s);
  return out_[static_cast<size_t>(s)];
}

Lattice connect(const Lattice& lattice) {
  int n = lattice.num_states();
  std::vector<char> fwd(static_cast<size_t>(n), 0), bwd(static_cast<size_t>(n), 0);
  if (lattice.start() >= 0) fwd[static_cast<size_t>(lattice.start())] = 1;

  // Arc-relaxation sweeps; acyclic inputs converge in at most n passes.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Arc& a : lattice.arcs())
      if (fwd[static_cast<size_t>(a.src)] && !fwd[static_cast<size_t>(a.dst)]) {
        fwd[static_cast<size_t>(a.dst)] = 1;
        changed = true;
      }
  }
  for (StateId s = 0; s < n; ++s)
    if (lattice.is_final(s)) bwd[static_cast<size_t>(s)] = 1;
  changed = true;
  while (changed) {
    changed = false;
    for (const Arc& a : lattice.arcs())
      if (bwd[static_cast<size_t>(a.dst)] && !bwd[static_cast<size_t>(a.src)]) {
        bwd[static_cast<size_t>(a.src)] = 1;
        changed = true;
      }
  }

  std::vector<StateId> remap(static_cast<size_t>(n), -1);
  Lattice out;
  for (StateId s = 0; s < n; ++s)
    if (fwd[static_cast<size_t>(s)] && bwd[static_cast<size_t>(s)])
      remap[static_cast<size_t>(s)] = out.add_state();
  if (lattice.start() < 0 || remap[static_cast<size_t>(lattice.start())] < 0)
    throw NoFinalStateError("no path from start to any final state");
  out.set_start(remap[static_cast<size_t>(lattice.start())]);
  for (const Arc& a : lattice.arcs()) {
    StateId s = remap[static_cast<size_t>(a.src)], d = remap[static_cast<size_t>(a.dst)];
    if (s >= 0 && d >= 0) out.add_arc({s, d, a.word, a.cost});
  }
  for (StateId s = 0; s < n; ++s)
    if (lattice.is_final(s) && remap[static_cast<size_t>(s)] >= 0)
      out.set_final(remap[static_cast<size_t>(s)], lattice.final_cost(s));
  return out;
}

PathCosts forward_backward(const Lattice& lattice, double lm_scale) {
  if (!lattice.validated()) throw InvalidLatticeError("lattice not validated");
  if (!(lm_scale > 0)) throw InvalidLatticeError("lm_scale must be > 0");
  size_t n = static_cast<size_t>(lattice.num_states());
  PathCosts pc;
  pc.alpha.assign(n, kInfCost);
  pc.beta.assign(n, kInfCost);
  pc.alpha[static_cast<size_t>(lattice.start())] = 0.0;
  const auto& topo = lattice.topo_order();
  for (StateId s : topo) {
    double as = pc.alpha[static_cast<size_t>(s)];
    if (as == kInfCost) continue;
    for (int ai : lattice.out_arcs(s)) {
      const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
      double cand = as + a.cost.combined(lm_scale);
      double& ad = pc.alpha[static_cast<size_t>(a.dst)];
      if (cand < ad) ad = cand;
    }
  }
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    StateId s = *it;
    double best = lattice.is_final(s) ? lm_scale * lattice.final_cost(s) : kInfCost;
    for (int ai : lattice.out_arcs(s)) {
      const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
      double cand = a.cost.combined(lm_scale) + pc.beta[static_cast<size_t>(a.dst)];
      if (cand < best) best = cand;
    }
    pc.beta[static_cast<size_t>(s)] = best;
  }
  pc.total = pc.beta[static_cast<size_t>(lattice.start())];
  return pc;
}

namespace {

// Per-state choice made by best_path: stop at this (final) state, or take
// one out-arc and continue with the already-fixed choice at its target.
struct Choice {
  int arc = -1;  // -1 means stop
  double cost = kInfCost;
};

// Iterates the non-epsilon words of the chosen suffix starting at a state.
class SuffixIter {
 public:
  SuffixIter(const Lattice& lat, const std::vector<Choice>& choice, StateId s)
      : lat_(lat), choice_(choice), state_(s) {}

  // Returns next word or kNoToken at end of suffix.
  TokenId next() {
    while (state_ >= 0) {
      int ai = choice_[static_cast<size_t>(state_)].arc;
      if (ai < 0) return kNoToken;
      const Arc& a = lat_.arcs()[static_cast<size_t>(ai)];
      state_ = a.dst;
      if (a.word != kEpsToken) return a.word;
    }
    return kNoToken;
  }

 private:
  const Lattice& lat_;
  const std::vector<Choice>& choice_;
  StateId state_;
};

// Lexicographic comparison of two chosen suffixes, first word overridden.
// Returns true if (w1, suffix from s1) < (w2, suffix from s2).
bool suffix_less(const Lattice& lat, const std::vector<Choice>& choice,
                 TokenId w1, StateId s1, TokenId w2, StateId s2) {
  SuffixIter i1(lat, choice, s1), i2(lat, choice, s2);
  TokenId a = (w1 == kEpsToken) ? i1.next() : w1;
  TokenId b = (w2 == kEpsToken) ? i2.next() : w2;
  while (true) {
    if (a == kNoToken && b == kNoToken) return false;
    if (a == kNoToken) return true;   // prefix is smaller
    if (b == kNoToken) return false;
    if (a != b) return a < b;
    a = i1.next();
    b = i2.next();
  }
}

}  // namespace

BestPath best_path(const Lattice& lattice, double lm_scale) {
  if (!lattice.validated()) throw InvalidLatticeError("lattice not validated");
  size_t n = static_cast<size_t>(lattice.num_states());
  std::vector<Choice> choice(n);
  const auto& topo = lattice.topo_order();
  // Reverse topological sweep; each state picks stop-or-arc minimizing
  // (cost, lexicographic suffix).  Exact cost equality triggers the tie rule.
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    StateId s = *it;
    Choice best;
    if (lattice.is_final(s)) {
      best.arc = -1;
      best.cost = lm_scale * lattice.final_cost(s);
    }
    for (int ai : lattice.out_arcs(s)) {
      const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
      double sub = choice[static_cast<size_t>(a.dst)].cost;
      if (sub == kInfCost) continue;
      double cand = a.cost.combined(lm_scale) + sub;
      bool take = false;
      if (cand < best.cost) {
        take = true;
      } else if (cand == best.cost && best.cost != kInfCost) {
        if (best.arc < 0) {
          take = false;  // stopping yields a strict prefix, always smaller
        } else {
          const Arc& b = lattice.arcs()[static_cast<size_t>(best.arc)];
          take = suffix_less(lattice, choice, a.word, a.dst, b.word, b.dst);
        }
      }
      if (take) {
        best.arc = ai;
        best.cost = cand;
      }
    }
    choice[static_cast<size_t>(s)] = best;
  }

  BestPath bp;
  bp.cost = choice[static_cast<size_t>(lattice.start())].cost;
  if (bp.cost == kInfCost)
    throw InvalidLatticeError("no path from start to a final state");
  StateId s = lattice.start();
  while (true) {
    int ai = choice[static_cast<size_t>(s)].arc;
    if (ai < 0) break;
    const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
    bp.arc_indices.push_back(ai);
    if (a.word != kEpsToken) bp.words.push_back(a.word);
    s = a.dst;
  }
  bp.end_state = s;
  return bp;
}

long long count_paths(const Lattice& lattice, long long cap) {
  if (!lattice.validated()) throw InvalidLatticeError("lattice not validated");
  size_t n = static_cast<size_t>(lattice.num_states());
  std::vector<long long> count(n, 0);
  const auto& topo = lattice.topo_order();
  long long total = 0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    StateId s = *it;
    long long c = lattice.is_final(s) ? 1 : 0;
    for (int ai : lattice.out_arcs(s)) {
      c += count[static_cast<size_t>(lattice.arcs()[static_cast<size_t>(ai)].dst)];
      if (c > cap) {
        c = cap;
        break;
      }
    }
    count[static_cast<size_t>(s)] = c;
  }
  total = count[static_cast<size_t>(lattice.start())];
  return total;
}

}  // namespace convlat
