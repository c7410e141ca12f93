#include "convlat/rescore.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace convlat {

namespace {

struct ComposedKey {
  StateId a;
  std::vector<TokenId> hist;
  bool operator==(const ComposedKey&) const = default;
};

struct ComposedKeyHash {
  size_t operator()(const ComposedKey& k) const {
    size_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.a)));
    for (TokenId t : k.hist)
      mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) + 1);
    return h;
  }
};

struct Composed {
  StateId a = -1;
  std::vector<TokenId> hist;
  DifferenceLm::State lm;
  double alpha = kInfCost;  // best arrival, ranking units over the output
  double delta = 0.0;
  double final_cost = kInfCost;
  int version = 0;
  int reexpansions = 0;
  bool is_final = false;
  std::vector<int> preds;
  std::unordered_map<int, size_t> arc_slot;  // input arc index -> result arc
};

struct QueueEntry {
  double priority;
  long seq;
  int id;
  int version;
};

struct QueueOrder {
  bool operator()(const QueueEntry& x, const QueueEntry& y) const {
    return std::tie(x.priority, x.seq) > std::tie(y.priority, y.seq);
  }
};

}  // namespace

Lattice rescore_compose(const Lattice& in, const DifferenceLm& lm,
                        const RescoreOptions& opts, RescoreStats* stats_out) {
  if (!in.validated())
    throw InvalidLatticeError("rescoring requires a validated lattice");
  if (opts.lm_scale <= 0.0) throw ConfigError("lm_scale must be > 0");
  if (opts.beam < 0.0) throw ConfigError("beam must be >= 0");

  const PathCosts pc = forward_backward(in, opts.lm_scale);
  const size_t limit = static_cast<size_t>(std::max(opts.history_limit, 0));
  const bool unbounded = opts.history_limit < 0;

  std::deque<Composed> nodes;
  std::unordered_map<ComposedKey, int, ComposedKeyHash> index;
  std::vector<Arc> result_arcs;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> heap;
  RescoreStats stats;
  long seq = 0;

  nodes.emplace_back();
  nodes[0].a = in.start();
  nodes[0].lm = lm.begin();
  nodes[0].alpha = 0.0;
  index.emplace(ComposedKey{in.start(), {}}, 0);
  heap.push({pc.beta[static_cast<size_t>(in.start())], seq++, 0, 0});

  double best_final = kInfCost;

  while (!heap.empty()) {
    QueueEntry e = heap.top();
    heap.pop();
    Composed& c = nodes[static_cast<size_t>(e.id)];
    if (e.version != c.version) continue;  // superseded arrival
    double h_now = c.alpha + pc.beta[static_cast<size_t>(c.a)] + c.delta;
    if (h_now > best_final + opts.beam) {
      ++stats.states_pruned;
      continue;
    }
    if (++stats.states_expanded > opts.max_expansions)
      throw ExpansionBudgetError(
          "composed-lattice expansion exceeded " +
          std::to_string(opts.max_expansions) +
          " states; the lattice is too large for this mode");

    if (in.is_final(c.a)) {
      c.final_cost = in.final_cost(c.a) + lm.end_delta(c.lm);
      c.is_final = true;
      best_final =
          std::min(best_final, c.alpha + opts.lm_scale * c.final_cost);
    }

    for (int ai : in.out_arcs(c.a)) {
      const Arc& arc = in.arcs()[static_cast<size_t>(ai)];
      double delta_cost = 0.0;
      DifferenceLm::State next_lm = c.lm;
      if (arc.word != kEpsToken) {
        auto [d, s] = lm.step_delta(c.lm, arc.word);
        delta_cost = d;
        next_lm = std::move(s);
      }
      Cost new_cost{arc.cost.graph + delta_cost, arc.cost.acoustic};

      ComposedKey key{arc.dst, c.hist};
      if (arc.word != kEpsToken) {
        key.hist.push_back(arc.word);
        if (!unbounded && key.hist.size() > limit)
          key.hist.erase(key.hist.begin(),
                         key.hist.end() - static_cast<long>(limit));
      }
      double cand_alpha = c.alpha + new_cost.combined(opts.lm_scale);

      auto [it, created] = index.try_emplace(key, static_cast<int>(nodes.size()));
      int child_id = it->second;
      if (created) {
        nodes.emplace_back();
        Composed& ch = nodes.back();
        ch.a = arc.dst;
        ch.hist = key.hist;
        ch.lm = std::move(next_lm);
        ch.alpha = cand_alpha;
        heap.push({cand_alpha + pc.beta[static_cast<size_t>(arc.dst)], seq++,
                   child_id, 0});
      } else {
        Composed& ch = nodes[static_cast<size_t>(child_id)];
        if (cand_alpha + 1e-12 < ch.alpha &&
            ch.reexpansions < opts.max_reexpansions) {
          ch.alpha = cand_alpha;
          ch.lm = next_lm;
          ++ch.version;
          ++ch.reexpansions;
          ++stats.reexpansions;
          heap.push({cand_alpha + pc.beta[static_cast<size_t>(ch.a)] + ch.delta,
                     seq++, child_id, ch.version});
        }
      }

      auto [slot_it, slot_new] = c.arc_slot.try_emplace(ai, result_arcs.size());
      if (slot_new) {
        result_arcs.push_back(
            {e.id, child_id, arc.word, new_cost});
        nodes[static_cast<size_t>(child_id)].preds.push_back(e.id);
      } else {
        result_arcs[slot_it->second].cost = new_cost;
      }
    }

    // Lazy correction: this state's settled estimate refines its
    // predecessors' delta toward their true backward cost.
    double c_h = c.alpha + pc.beta[static_cast<size_t>(c.a)] + c.delta;
    for (int p : c.preds) {
      Composed& pn = nodes[static_cast<size_t>(p)];
      double candidate = c_h - (pn.alpha + pc.beta[static_cast<size_t>(pn.a)]);
      pn.delta = std::min(pn.delta, candidate);
    }
  }

  if (best_final == kInfCost)
    throw EmptyResultError(
        "no complete path survived expansion; widen the beam");

  Lattice out;
  out.add_states(static_cast<int>(nodes.size()));
  out.set_start(0);
  for (const Arc& arc : result_arcs) out.add_arc(arc);
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_final)
      out.set_final(static_cast<StateId>(i), nodes[i].final_cost);

  Lattice result = connect(out);
  result.validate(true);
  stats.composed_states = static_cast<long>(nodes.size());
  if (stats_out) *stats_out = stats;
  return result;
}

Lattice rescore_exact(const Lattice& lattice, const DifferenceLm& lm,
                      double lm_scale, long max_expansions,
                      RescoreStats* stats) {
  RescoreOptions opts;
  opts.history_limit = -1;
  opts.beam = kInfCost;
  opts.lm_scale = lm_scale;
  opts.max_expansions = max_expansions;
  return rescore_compose(lattice, lm, opts, stats);
}

Lattice rescore_ngram_approx(const Lattice& lattice, const DifferenceLm& lm,
                             double lm_scale, int n, RescoreStats* stats) {
  if (n < 1) throw ConfigError("approximation order must be >= 1");
  RescoreOptions opts;
  opts.history_limit = n - 1;
  opts.beam = kInfCost;
  opts.lm_scale = lm_scale;
  return rescore_compose(lattice, lm, opts, stats);
}

Lattice rescore_pruned(const Lattice& lattice, const DifferenceLm& lm,
                       double lm_scale, int n, double beam,
                       RescoreStats* stats) {
  if (n < 1) throw ConfigError("approximation order must be >= 1");
  RescoreOptions opts;
  opts.history_limit = n - 1;
  opts.beam = beam;
  opts.lm_scale = lm_scale;
  return rescore_compose(lattice, lm, opts, stats);
}

}  // namespace convlat
