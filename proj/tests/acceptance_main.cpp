// Release gate: every check below must hold before shipping.  Each criterion
// prints one [PASS]/[FAIL] line; the process exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "convlat/context.hpp"
#include "convlat/conversation.hpp"
#include "convlat/eval.hpp"
#include "convlat/ngram_lm.hpp"
#include "convlat/rescore.hpp"
#include "convlat/rnnlm.hpp"
#include "convlat/textprep.hpp"
#include "support/test_util.hpp"

using namespace convlat;
using namespace convlat::testing;
using Clock = std::chrono::steady_clock;

namespace {

bool g_all_ok = true;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int idx, const std::string& name, bool ok,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", idx,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) g_all_ok = false;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria 1-3: random-lattice suite with a bigram subtract-LM and a briefly
// trained recurrent add-LM.

struct LatticeSuite {
  Vocabulary vocab = make_word_vocab(24);
  TokenId tag = vocab.add("SP");
  RandomLatticeOptions lat_opts;  // keep the tag off random word arcs
  NgramModel bigram;
  RnnLm<float> rnn;
  std::vector<Lattice> lattices;

  LatticeSuite() : bigram(train(vocab)), rnn(rnn_config(), vocab) {
    lat_opts.num_words = 24;
    std::mt19937_64 rng(1001);
    rnn.train(random_sentences(rng, vocab, 60, 1, 8));
    std::mt19937_64 lat_rng(2002);
    for (int i = 0; i < 200; ++i)
      lattices.push_back(random_lattice(lat_rng, vocab, lat_opts));
  }
  static NgramModel train(const Vocabulary& vocab) {
    std::mt19937_64 rng(1000);
    return train_addone_ngram(random_sentences(rng, vocab, 80, 1, 8), 2,
                              vocab);
  }
  static RnnLmConfig rnn_config() {
    RnnLmConfig cfg;
    cfg.embed_dim = 10;
    cfg.hidden_dim = 16;
    cfg.epochs = 3;
    cfg.seed = 17;
    return cfg;
  }
};

void criteria_1_to_3(const LatticeSuite& suite) {
  RnnSequenceLm add(suite.rnn);
  DifferenceLm lm(&suite.bigram, &add, 1.0);

  // 1: exact composition against the exhaustive n-best oracle.
  auto t0 = Clock::now();
  int exact_ok = 0;
  std::vector<BestPath> exact_best;
  for (const Lattice& lat : suite.lattices) {
    Lattice exact = rescore_exact(lat, lm);
    BestPath bp = best_path(exact, 1.0);
    OraclePath oracle = oracle_rescore_nbest(lat, lm, 1.0);
    if (bp.words == oracle.words &&
        std::abs(bp.cost - oracle.total_cost) <= 1e-9)
      ++exact_ok;
    exact_best.push_back(std::move(bp));
  }
  double dt1 = seconds_since(t0);
  report(1, "exact rescoring equals the exhaustive n-best oracle",
         exact_ok == 200 && dt1 < 120.0,
         fmt("%d/200 lattices, %.1fs (budget 120s)", exact_ok, dt1));

  // 2: histories merged beyond the longest path change nothing.
  int approx_ok = 0;
  for (size_t i = 0; i < suite.lattices.size(); ++i) {
    const Lattice& lat = suite.lattices[i];
    size_t longest = 0;
    for (const auto& p : enumerate_paths(lat))
      longest = std::max(longest, p.words.size());
    Lattice approx =
        rescore_ngram_approx(lat, lm, 1.0, static_cast<int>(longest) + 1);
    BestPath bp = best_path(approx, 1.0);
    if (bp.words == exact_best[i].words &&
        std::abs(bp.cost - exact_best[i].cost) <= 1e-9)
      ++approx_ok;
  }
  report(2, "wide merge order reproduces exact composition",
         approx_ok == 200, fmt("%d/200 lattices", approx_ok));

  // 3: beam-pruned search converges and visits fewer states.
  int ok_beam15 = 0, ok_beam_wide = 0, qualifying = 0;
  long expanded_unpruned = 0, expanded_beam15 = 0;
  for (const Lattice& lat : suite.lattices) {
    RescoreStats unpruned_stats, beam15_stats;
    Lattice unpruned = rescore_ngram_approx(lat, lm, 1.0, 4, &unpruned_stats);
    double unpruned_cost = best_path(unpruned, 1.0).cost;
    Lattice beam15 = rescore_pruned(lat, lm, 1.0, 4, 15.0, &beam15_stats);
    if (std::abs(best_path(beam15, 1.0).cost - unpruned_cost) <= 1e-9)
      ++ok_beam15;
    Lattice wide = rescore_pruned(lat, lm, 1.0, 4, 1e6);
    if (std::abs(best_path(wide, 1.0).cost - unpruned_cost) <= 1e-9)
      ++ok_beam_wide;
    if (unpruned_stats.composed_states > 50) {
      ++qualifying;
      expanded_unpruned += unpruned_stats.states_expanded;
      expanded_beam15 += beam15_stats.states_expanded;
    }
  }
  double ratio = qualifying ? static_cast<double>(expanded_beam15) /
                                  static_cast<double>(expanded_unpruned)
                            : 1.0;
  report(3, "beam pruning converges while expanding fewer states",
         ok_beam15 >= 198 && ok_beam_wide == 200 && qualifying > 0 &&
             ratio < 0.70,
         fmt("beam 15: %d/200, beam 1e6: %d/200, expansion ratio %.2f over "
             "%d lattices above 50 states",
             ok_beam15, ok_beam_wide, ratio, qualifying));
}

// ---------------------------------------------------------------------------
// Criterion 4: concatenation invariants on random lattice pairs.

void criterion_4(const LatticeSuite& suite) {
  std::mt19937_64 rng(3003);
  std::mt19937_64 corpus_rng(3004);
  NgramModel uni_sub = train_addone_ngram(
      random_sentences(corpus_rng, suite.vocab, 40, 1, 6), 1, suite.vocab);
  NgramModel uni_add_model = train_addone_ngram(
      random_sentences(corpus_rng, suite.vocab, 40, 1, 6), 1, suite.vocab);
  NgramSequenceLm uni_add(uni_add_model);
  DifferenceLm udiff(&uni_sub, &uni_add, 1.0);

  int set_ok = 0, extract_ok = 0;
  for (int i = 0; i < 100; ++i) {
    Lattice prev = random_lattice(rng, suite.vocab, suite.lat_opts);
    Lattice cur = random_lattice(rng, suite.vocab, suite.lat_opts);
    Lattice joined =
        concat_lattices(prev, cur, {TagKind::sp, suite.tag}, 2, suite.vocab);

    std::vector<PathEnum> expected;
    for (const auto& p : enumerate_paths(prev)) {
      for (const auto& c : enumerate_paths(cur)) {
        PathEnum e;
        e.words = p.words;
        e.words.push_back(suite.tag);
        e.words.insert(e.words.end(), c.words.begin(), c.words.end());
        e.graph = p.graph + c.graph;
        e.acoustic = p.acoustic + c.acoustic;
        expected.push_back(std::move(e));
      }
    }
    if (same_path_set(enumerate_paths(joined), std::move(expected), 1e-9))
      ++set_ok;

    BestPath alone = best_path(rescore_exact(cur, udiff), 1.0);
    Lattice joined_rescored = rescore_exact(joined, udiff);
    ExtractResult ex =
        extract_context_region(joined_rescored, {suite.tag}, 1.0);
    double suffix_total = (ex.cost.graph + ex.final_cost) + ex.cost.acoustic;
    if (ex.words == alone.words &&
        std::abs(suffix_total - alone.cost) <= 1e-9)
      ++extract_ok;
  }
  report(4,
         "concatenation is the cost-additive product set and a context-free "
         "difference rescoring splits cleanly at the junction",
         set_ok == 100 && extract_ok == 100,
         fmt("path sets %d/100, junction extraction %d/100", set_ok,
             extract_ok));
}

// ---------------------------------------------------------------------------
// Criteria 5-6: the synthetic conversational corpus.

struct ConversationalRun {
  SynthDataset ds;
  LatticeProvider provider;
  RnnLm<float> plain_rnn, sid_rnn, sp_rnn;
  double plain_ppl = 0.0, sid_ppl = 0.0;

  static RnnLmConfig rnn_config() {
    RnnLmConfig cfg;
    cfg.embed_dim = 24;
    cfg.hidden_dim = 48;
    cfg.epochs = 16;
    cfg.bptt = 16;
    cfg.learning_rate = 0.1;
    cfg.seed = 1;
    return cfg;
  }

  explicit ConversationalRun(const SynthConfig& synth)
      : ds(generate_synthetic_conversations(synth)),
        provider([this](const std::string& p) -> const Lattice& {
          return ds.lattices[ds.lattice_index.at(p)];
        }),
        plain_rnn(rnn_config(), *ds.vocab),
        sid_rnn(rnn_config(), *ds.vocab),
        sp_rnn(rnn_config(), *ds.vocab) {
    auto ids = [&](const DialogueCorpus& corpus, ConcatOptions opts) {
      return corpus_to_ids(build_concat_corpus(corpus, opts), *ds.vocab);
    };
    ConcatOptions per_turn;
    per_turn.k = 1;
    // Disjoint blocks keep the token exposure of the concatenated regimes
    // comparable to the per-turn one; cyclic windows would show the model
    // every utterance k times per epoch.
    ConcatOptions sid;
    sid.tag = TagKind::sid;
    sid.cyclic = false;
    ConcatOptions sp;
    sp.tag = TagKind::sp;
    sp.k = 2;  // matches rescoring, which joins one previous utterance
    sp.cyclic = false;

    plain_ppl = plain_rnn.train(ids(ds.train, per_turn),
                                ids(ds.eval, per_turn)).heldout_ppl;
    sid_ppl =
        sid_rnn.train(ids(ds.train, sid), ids(ds.eval, sid)).heldout_ppl;
    sp_rnn.train(ids(ds.train, sp));
  }
};

std::string last_word(const std::string& text) {
  auto pos = text.find_last_of(' ');
  return pos == std::string::npos ? text : text.substr(pos + 1);
}

void criteria_5_and_6() {
  auto t0 = Clock::now();
  // Repeat probability 0.6 and seed 1 stay at their defaults.  The corpus is
  // big and low-entropy so a small recurrent model generalizes instead of
  // memorizing training dialogues.
  SynthConfig synth;
  synth.train_dialogues = 1200;
  synth.eval_dialogues = 30;
  synth.carrier_words = 10;
  synth.carrier_min = 2;
  synth.carrier_max = 4;
  synth.num_entities = 12;
  synth.num_fillers = 2;
  ConversationalRun run(synth);

  RnnSequenceLm plain_seq(run.plain_rnn);
  RnnSequenceLm sp_seq(run.sp_rnn);
  DifferenceLm plain_lm(&run.ds.first_pass_lm, &plain_seq, 1.0);
  DifferenceLm sp_lm(&run.ds.first_pass_lm, &sp_seq, 1.0);

  GridSpec spec;
  spec.n = 4;
  spec.beam = 15.0;
  spec.lm_scale = 1.0;
  unsigned hw = std::thread::hardware_concurrency();
  spec.jobs = hw ? static_cast<int>(std::min(hw, 8u)) : 1;
  spec.conditions.push_back({"first_pass", {}, true, nullptr});
  spec.conditions.push_back(
      {"plain", {TagKind::none, std::nullopt, 1}, false, &plain_lm});
  spec.conditions.push_back(
      {"sp_always", {TagKind::sp, std::nullopt, 1}, false, &sp_lm});
  spec.conditions.push_back(
      {"sp_noconcat", {TagKind::none, std::nullopt, 1}, false, &sp_lm});
  const std::vector<double> taus = {0.0, 0.1, 0.3, 0.5, 0.9};
  for (double tau : taus) {
    std::ostringstream name;
    name << "sp_tau_" << tau;
    spec.conditions.push_back(
        {name.str(), {TagKind::sp, tau, 1}, false, &sp_lm});
  }
  spec.conditions.push_back(
      {"sp_tau_high", {TagKind::sp, 1.5, 1}, false, &sp_lm});

  GridReport grid = run_grid(run.ds.conversations, run.provider,
                             *run.ds.vocab, spec);
  auto row = [&](const std::string& name) -> const GridRow& {
    for (const auto& r : grid.rows)
      if (r.name == name) return r;
    std::fprintf(stderr, "missing grid row %s\n", name.c_str());
    std::abort();
  };

  // 5a: perplexity of the concatenated training regime.
  bool ppl_ok = std::isfinite(run.sid_ppl) && std::isfinite(run.plain_ppl) &&
                run.sid_ppl < run.plain_ppl;

  // 5b: pooled error rates.
  const GridRow& plain_row = row("plain");
  const GridRow& sp_row = row("sp_always");
  double cer_plain = plain_row.pooled.cer, cer_sp = sp_row.pooled.cer;
  double rel = cer_plain > 0.0 ? (cer_plain - cer_sp) / cer_plain : 0.0;
  bool cer_ok = plain_row.pooled.cer_defined && sp_row.pooled.cer_defined &&
                cer_sp < cer_plain && rel >= 0.02;

  // 5c: a corrected entity confusion, shown verbatim.
  bool confusion_found = false;
  size_t idx = 0;
  for (const auto& conv : run.ds.conversations) {
    for (const auto& utt : conv.utterances) {
      const std::string& ref = utt.ref_text;
      const std::string& plain_hyp = plain_row.hyps[idx].hypothesis;
      const std::string& sp_hyp = sp_row.hyps[idx].hypothesis;
      ++idx;
      if (!confusion_found && sp_hyp == ref && plain_hyp != ref &&
          last_word(plain_hyp) != last_word(ref)) {
        confusion_found = true;
        std::printf("corrected entity confusion (%s utterance %d):\n",
                    utt.conv_id.c_str(), utt.utt_index);
        std::printf("  ref:     %s\n", ref.c_str());
        std::printf("  plain:   %s\n", plain_hyp.c_str());
        std::printf("  context: %s\n", sp_hyp.c_str());
      }
    }
  }

  double dt = seconds_since(t0);
  report(5,
         "conversation context helps: perplexity, pooled error rate, and a "
         "corrected entity confusion",
         ppl_ok && cer_ok && confusion_found && dt < 600.0,
         fmt("heldout ppl %.2f (concat) vs %.2f (plain); pooled CER %.4f vs "
             "%.4f, relative reduction %.1f%%; confusion %s; %.0fs (budget "
             "600s)",
             run.sid_ppl, run.plain_ppl, cer_sp, cer_plain, 100.0 * rel,
             confusion_found ? "shown above" : "NOT FOUND", dt));

  // 6: similarity gating.
  bool monotone = true;
  long prev_count = row("sp_always").concatenated;
  std::string sweep = fmt("always:%ld", prev_count);
  for (double tau : taus) {
    std::ostringstream name;
    name << "sp_tau_" << tau;
    long count = row(name.str()).concatenated;
    sweep += fmt(" tau%.1f:%ld", tau, count);
    if (count > prev_count) monotone = false;
    prev_count = count;
  }

  std::ostringstream no_concat_bytes, tau_high_bytes;
  write_hyps(row("sp_noconcat").hyps, no_concat_bytes);
  write_hyps(row("sp_tau_high").hyps, tau_high_bytes);
  bool high_tau_identical = no_concat_bytes.str() == tau_high_bytes.str() &&
                            row("sp_tau_high").concatenated == 0;

  std::vector<std::vector<TokenId>> first_pass_docs;
  for (const auto& conv : run.ds.conversations)
    for (const auto& utt : conv.utterances)
      first_pass_docs.push_back(
          best_path(run.provider(utt.lattice_path), 1.0).words);
  TfIdfModel gate_model = fit_tfidf(first_pass_docs);
  GateDecision self = should_concat(first_pass_docs[0], first_pass_docs[0],
                                    gate_model, {TagKind::sp, 0.5, 1});
  bool self_sim_ok = std::abs(self.similarity - 1.0) <= 1e-9;

  report(6,
         "similarity gating: counts fall with the threshold, a high "
         "threshold is byte-identical to no concatenation, identical "
         "hypotheses score 1",
         monotone && high_tau_identical && self_sim_ok,
         fmt("%s; high-tau identical: %s; self similarity %.12f", sweep.c_str(),
             high_tau_identical ? "yes" : "no", self.similarity));
}

// ---------------------------------------------------------------------------
// Criterion 7: numerical soundness.

double gradient_check(CellKind cell, int layers) {
  Vocabulary vocab = make_word_vocab(5);
  RnnLmConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.num_layers = layers;
  cfg.cell = cell;
  cfg.seed = 5;
  RnnLm<double> m(cfg, vocab);
  std::vector<TokenId> seq = {vocab.require("a0"), vocab.require("a2"),
                              vocab.require("a1"), vocab.require("a0"),
                              vocab.require("a3")};
  std::vector<double> analytic;
  m.loss_and_grads(seq, &analytic);
  const double h = 1e-5;
  double worst = 0.0;
  size_t off = 0;
  for (auto& t : m.tensors()) {
    double err2 = 0.0, na = 0.0, nn = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double orig = t.data[i];
      t.data[i] = orig + h;
      double up = m.loss_and_grads(seq, nullptr);
      t.data[i] = orig - h;
      double down = m.loss_and_grads(seq, nullptr);
      t.data[i] = orig;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[off + static_cast<size_t>(i)];
      err2 += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
    off += static_cast<size_t>(t.size());
    worst = std::max(worst, std::sqrt(err2) / std::max(1e-12, std::sqrt(na) +
                                                                   std::sqrt(nn)));
  }
  return worst;
}

void criterion_7(const LatticeSuite& suite) {
  double worst_grad = 0.0;
  for (CellKind cell : {CellKind::simple, CellKind::gated})
    for (int layers : {1, 2})
      worst_grad = std::max(worst_grad, gradient_check(cell, layers));

  double worst_norm = 0.0;
  std::mt19937_64 rng(4004);
  for (const auto& hist : random_sentences(rng, suite.vocab, 20, 0, 8)) {
    auto state = suite.rnn.history_state(hist);
    auto lp = suite.rnn.log_probs(state);
    double mass = 0.0;
    for (Eigen::Index i = 0; i < lp.size(); ++i)
      mass += std::exp(static_cast<double>(lp[i]));
    worst_norm = std::max(worst_norm, std::abs(mass - 1.0));
  }

  int cer_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<TokenId> ref, hyp;
    int rl = rand_int(rng, 15), hl = rand_int(rng, 15);
    for (int i = 0; i < rl; ++i) ref.push_back(5 + rand_int(rng, 5));
    for (int i = 0; i < hl; ++i) hyp.push_back(5 + rand_int(rng, 5));
    CerReport rep = cer(ref, hyp);
    if (rep.substitutions + rep.insertions + rep.deletions ==
        naive_edit_distance(ref, hyp))
      ++cer_ok;
  }

  report(7,
         "gradients, output normalization, and edit-distance counts are "
         "sound",
         worst_grad <= 1e-3 && worst_norm <= 1e-5 && cer_ok == 1000,
         fmt("worst gradient error %.2e, worst normalization drift %.2e, "
             "edit distance %d/1000",
             worst_grad, worst_norm, cer_ok));
}

}  // namespace

int main() {
  LatticeSuite suite;
  criteria_1_to_3(suite);
  criterion_4(suite);
  criteria_5_and_6();
  criterion_7(suite);
  if (!g_all_ok) {
    std::printf("acceptance: FAILURES PRESENT\n");
    return 1;
  }
  std::printf("acceptance: all criteria passed\n");
  return 0;
}
