#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>

#include "convlat/context.hpp"

namespace convlat {

namespace {

// Runs fn(0..items-1) over up to `jobs` worker threads.  The first exception
// wins; workers drain quickly once one fails.
void run_parallel(size_t items, int jobs,
                  const std::function<void(size_t)>& fn) {
  int threads = std::min<int>(jobs, static_cast<int>(items));
  if (threads <= 1) {
    for (size_t i = 0; i < items; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= items) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

TokenId junction_token(TagKind kind, const Utterance& utt,
                       const Vocabulary& vocab) {
  DialogueTurn turn;
  turn.speaker = utt.speaker;
  turn.intent = utt.intent;
  std::string name = tag_token_for(kind, turn);
  TokenId id = vocab.find(name);
  if (id == kNoToken)
    throw VocabMismatchError("junction tag \"" + name +
                             "\" is not in the vocabulary");
  return id;
}

}  // namespace

Lattice concat_lattices(const Lattice& prev, const Lattice& cur, TagWord tag,
                        int n, const Vocabulary& vocab) {
  if (!prev.validated() || !cur.validated())
    throw InvalidLatticeError("concatenation requires validated lattices");
  if (n < 1) throw ConfigError("history order must be >= 1");
  if (tag.token <= kEpsToken || tag.token >= vocab.size())
    throw VocabMismatchError("junction tag token " + std::to_string(tag.token) +
                             " is not in the vocabulary");

  // Private layers: states within n-2 arcs of cur's start (at least the
  // start itself), copied per prev final so the junction keeps full history.
  std::vector<int> depth(static_cast<size_t>(cur.num_states()), -1);
  std::deque<StateId> queue;
  depth[static_cast<size_t>(cur.start())] = 0;
  queue.push_back(cur.start());
  while (!queue.empty()) {
    StateId u = queue.front();
    queue.pop_front();
    for (int ai : cur.out_arcs(u)) {
      StateId v = cur.arcs()[static_cast<size_t>(ai)].dst;
      if (depth[static_cast<size_t>(v)] < 0) {
        depth[static_cast<size_t>(v)] = depth[static_cast<size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  const int limit = std::max(n - 1, 1);
  auto is_private = [&](StateId u) {
    return depth[static_cast<size_t>(u)] < limit;
  };

  Lattice out;
  out.add_states(prev.num_states() + cur.num_states());
  out.set_start(prev.start());
  for (const Arc& a : prev.arcs()) out.add_arc(a);

  // Shared image of cur; its start becomes unreachable and is trimmed later.
  const StateId shared0 = prev.num_states();
  for (const Arc& a : cur.arcs())
    out.add_arc({shared0 + a.src, shared0 + a.dst, a.word, a.cost});
  for (StateId f : cur.final_states())
    out.set_final(shared0 + f, cur.final_cost(f));

  std::vector<StateId> priv(static_cast<size_t>(cur.num_states()), -1);
  for (StateId f : prev.final_states()) {
    for (StateId u = 0; u < cur.num_states(); ++u)
      if (is_private(u)) priv[static_cast<size_t>(u)] = out.add_state();
    out.add_arc({f, priv[static_cast<size_t>(cur.start())], tag.token,
                 {prev.final_cost(f), 0.0}});
    for (const Arc& a : cur.arcs()) {
      if (!is_private(a.src)) continue;
      StateId dst = is_private(a.dst) ? priv[static_cast<size_t>(a.dst)]
                                      : shared0 + a.dst;
      out.add_arc({priv[static_cast<size_t>(a.src)], dst, a.word, a.cost});
    }
    for (StateId u = 0; u < cur.num_states(); ++u)
      if (is_private(u) && cur.is_final(u))
        out.set_final(priv[static_cast<size_t>(u)], cur.final_cost(u));
  }

  Lattice trimmed = connect(out);
  try {
    trimmed.validate(true);
  } catch (const CyclicLatticeError& e) {
    throw CycleCreatedError(e.what());
  }
  return trimmed;
}

ExtractResult extract_context_region(const Lattice& lattice,
                                     const std::vector<TokenId>& tag_tokens,
                                     double lm_scale, ExtractMode mode) {
  if (!lattice.validated())
    throw InvalidLatticeError("extraction requires a validated lattice");
  auto is_tag = [&](TokenId w) {
    return std::find(tag_tokens.begin(), tag_tokens.end(), w) !=
           tag_tokens.end();
  };
  bool any_tag = false;
  for (const Arc& a : lattice.arcs())
    if (is_tag(a.word)) {
      any_tag = true;
      break;
    }
  if (!any_tag) throw TagNotFoundError("lattice has no junction arc");

  BestPath bp = best_path(lattice, lm_scale);
  int cut = -1;
  for (size_t i = 0; i < bp.arc_indices.size(); ++i)
    if (is_tag(lattice.arcs()[static_cast<size_t>(bp.arc_indices[i])].word))
      cut = static_cast<int>(i);
  if (cut < 0) throw TagNotFoundError("best path crosses no junction arc");

  ExtractResult res;
  for (size_t i = static_cast<size_t>(cut) + 1; i < bp.arc_indices.size();
       ++i) {
    const Arc& a = lattice.arcs()[static_cast<size_t>(bp.arc_indices[i])];
    res.arc_indices.push_back(bp.arc_indices[i]);
    if (a.word != kEpsToken) res.words.push_back(a.word);
    res.cost.graph += a.cost.graph;
    res.cost.acoustic += a.cost.acoustic;
  }
  res.final_cost = lattice.final_cost(bp.end_state);

  if (mode == ExtractMode::sublattice) {
    const int ns = lattice.num_states();
    // Component-wise forward costs of the ranking-best prefix per state.
    std::vector<double> comb(static_cast<size_t>(ns), kInfCost);
    std::vector<Cost> parts(static_cast<size_t>(ns));
    comb[static_cast<size_t>(lattice.start())] = 0.0;
    for (StateId u : lattice.topo_order()) {
      if (comb[static_cast<size_t>(u)] == kInfCost) continue;
      for (int ai : lattice.out_arcs(u)) {
        const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
        double cand = comb[static_cast<size_t>(u)] + a.cost.combined(lm_scale);
        if (cand < comb[static_cast<size_t>(a.dst)]) {
          comb[static_cast<size_t>(a.dst)] = cand;
          parts[static_cast<size_t>(a.dst)] = {
              parts[static_cast<size_t>(u)].graph + a.cost.graph,
              parts[static_cast<size_t>(u)].acoustic + a.cost.acoustic};
        }
      }
    }

    std::vector<StateId> heads;
    for (const Arc& a : lattice.arcs())
      if (is_tag(a.word)) heads.push_back(a.dst);
    std::sort(heads.begin(), heads.end());
    heads.erase(std::unique(heads.begin(), heads.end()), heads.end());

    // Keep only heads no other head reaches, so chained junction layers do
    // not grow shortcut paths around the middle region.
    std::vector<char> dominated(heads.size(), 0);
    for (size_t hi = 0; hi < heads.size(); ++hi) {
      std::vector<char> seen(static_cast<size_t>(ns), 0);
      std::deque<StateId> queue{heads[hi]};
      seen[static_cast<size_t>(heads[hi])] = 1;
      while (!queue.empty()) {
        StateId u = queue.front();
        queue.pop_front();
        for (int ai : lattice.out_arcs(u)) {
          StateId v = lattice.arcs()[static_cast<size_t>(ai)].dst;
          if (!seen[static_cast<size_t>(v)]) {
            seen[static_cast<size_t>(v)] = 1;
            queue.push_back(v);
          }
        }
      }
      for (size_t hj = 0; hj < heads.size(); ++hj)
        if (hj != hi && seen[static_cast<size_t>(heads[hj])]) dominated[hj] = 1;
    }

    std::vector<char> in_region(static_cast<size_t>(ns), 0);
    std::deque<StateId> queue;
    for (size_t hi = 0; hi < heads.size(); ++hi) {
      if (dominated[hi]) continue;
      in_region[static_cast<size_t>(heads[hi])] = 1;
      queue.push_back(heads[hi]);
    }
    while (!queue.empty()) {
      StateId u = queue.front();
      queue.pop_front();
      for (int ai : lattice.out_arcs(u)) {
        StateId v = lattice.arcs()[static_cast<size_t>(ai)].dst;
        if (!in_region[static_cast<size_t>(v)]) {
          in_region[static_cast<size_t>(v)] = 1;
          queue.push_back(v);
        }
      }
    }

    Lattice region;
    StateId start = region.add_state();
    region.set_start(start);
    std::vector<StateId> map(static_cast<size_t>(ns), -1);
    for (StateId u = 0; u < ns; ++u)
      if (in_region[static_cast<size_t>(u)])
        map[static_cast<size_t>(u)] = region.add_state();
    for (size_t hi = 0; hi < heads.size(); ++hi) {
      if (dominated[hi]) continue;
      StateId h = heads[hi];
      region.add_arc({start, map[static_cast<size_t>(h)], kEpsToken,
                      parts[static_cast<size_t>(h)]});
    }
    for (const Arc& a : lattice.arcs()) {
      if (!in_region[static_cast<size_t>(a.src)]) continue;
      region.add_arc({map[static_cast<size_t>(a.src)],
                      map[static_cast<size_t>(a.dst)], a.word, a.cost});
    }
    for (StateId u = 0; u < ns; ++u)
      if (in_region[static_cast<size_t>(u)] && lattice.is_final(u))
        region.set_final(map[static_cast<size_t>(u)], lattice.final_cost(u));
    region.validate(true);
    res.region = std::move(region);
    res.has_region = true;
  }
  return res;
}

GateDecision should_concat(const std::vector<TokenId>& prev_hyp,
                           const std::vector<TokenId>& cur_hyp,
                           const TfIdfModel& model, const ConcatPolicy& policy) {
  GateDecision d;
  d.similarity = tfidf_cosine(model, prev_hyp, cur_hyp);
  d.concat = policy.tag != TagKind::none &&
             (!policy.tau.has_value() || d.similarity > *policy.tau);
  return d;
}

std::vector<HypRecord> rescore_with_context(
    const std::vector<Conversation>& convs,
    const std::function<const Lattice&(const std::string&)>& lattice_by_path,
    const DifferenceLm& lm, const Vocabulary& vocab, const ConcatPolicy& policy,
    int n, double beam, double lm_scale, int jobs,
    std::vector<RescoreStats>* stats) {
  if (n < 1) throw ConfigError("history order must be >= 1");
  if (policy.context_depth < 1) throw ConfigError("context_depth must be >= 1");

  std::vector<size_t> offset(convs.size() + 1, 0);
  for (size_t ci = 0; ci < convs.size(); ++ci)
    offset[ci + 1] = offset[ci] + convs[ci].utterances.size();
  const size_t total = offset.back();
  if (total == 0) {
    if (stats) stats->clear();
    return {};
  }

  // First pass: 1-best hypotheses, the similarity model's document corpus.
  std::vector<std::vector<std::vector<TokenId>>> first_pass(convs.size());
  run_parallel(convs.size(), jobs, [&](size_t ci) {
    const Conversation& conv = convs[ci];
    auto& fp = first_pass[ci];
    fp.reserve(conv.utterances.size());
    for (const Utterance& utt : conv.utterances)
      fp.push_back(best_path(lattice_by_path(utt.lattice_path), lm_scale).words);
  });
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(total);
  for (const auto& fp : first_pass)
    for (const auto& doc : fp) docs.push_back(doc);
  const TfIdfModel tfidf = fit_tfidf(docs);

  std::vector<HypRecord> records(total);
  std::vector<RescoreStats> all_stats(total);
  run_parallel(convs.size(), jobs, [&](size_t ci) {
    const Conversation& conv = convs[ci];
    std::vector<TokenId> prev_words;
    for (size_t u = 0; u < conv.utterances.size(); ++u) {
      const Utterance& utt = conv.utterances[u];
      const Lattice& cur = lattice_by_path(utt.lattice_path);
      HypRecord rec;
      rec.conv_id = utt.conv_id;
      rec.utt_index = utt.utt_index;
      RescoreStats st;
      GateDecision gate;
      if (u > 0)
        gate = should_concat(prev_words, first_pass[ci][u], tfidf, policy);
      std::vector<TokenId> hyp_words;
      if (u > 0 && gate.concat) {
        // Chain previous first-pass lattices in front, nearest last so each
        // junction tag names its earlier side.
        const int depth = static_cast<int>(
            std::min<size_t>(static_cast<size_t>(policy.context_depth), u));
        const Lattice* base = &cur;
        Lattice chained;
        std::vector<TokenId> tags;
        for (int d = 1; d <= depth; ++d) {
          const Utterance& prev_utt = conv.utterances[u - static_cast<size_t>(d)];
          TokenId tok = junction_token(policy.tag, prev_utt, vocab);
          if (std::find(tags.begin(), tags.end(), tok) == tags.end())
            tags.push_back(tok);
          chained = concat_lattices(lattice_by_path(prev_utt.lattice_path),
                                    *base, {policy.tag, tok}, n, vocab);
          base = &chained;
        }
        Lattice res = rescore_pruned(*base, lm, lm_scale, n, beam, &st);
        ExtractResult ex = extract_context_region(res, tags, lm_scale);
        hyp_words = std::move(ex.words);
        rec.graph_cost = ex.cost.graph + ex.final_cost;
        rec.acoustic_cost = ex.cost.acoustic;
        rec.concatenated = true;
      } else {
        Lattice res = rescore_pruned(cur, lm, lm_scale, n, beam, &st);
        BestPath bp = best_path(res, lm_scale);
        hyp_words = std::move(bp.words);
        Cost sum;
        for (int ai : bp.arc_indices) {
          sum.graph += res.arcs()[static_cast<size_t>(ai)].cost.graph;
          sum.acoustic += res.arcs()[static_cast<size_t>(ai)].cost.acoustic;
        }
        rec.graph_cost = sum.graph + res.final_cost(bp.end_state);
        rec.acoustic_cost = sum.acoustic;
      }
      rec.similarity = gate.similarity;
      rec.total_cost = lm_scale * rec.graph_cost + rec.acoustic_cost;
      rec.hypothesis = join_tokens(vocab, hyp_words);
      records[offset[ci] + u] = std::move(rec);
      all_stats[offset[ci] + u] = st;
      prev_words = std::move(hyp_words);
    }
  });
  if (stats) *stats = std::move(all_stats);
  return records;
}

}  // namespace convlat
