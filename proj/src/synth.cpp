#include <random>
#include <string>
#include <vector>

#include "convlat/textprep.hpp"

namespace convlat {

namespace {

constexpr int kFirstPassOrder = 2;

// Uniform draws from explicit generator bits, so datasets reproduce across
// standard libraries.
double rand_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

int rand_int(std::mt19937_64& rng, int n) {
  return static_cast<int>(rand_unit(rng) * n) % n;
}

double rand_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(rng);
}

// One utterance: pre-entity words (carriers, possibly one filler), then the
// entity.  filler_pos is the filler's 1-based position in `pre` (0 = none);
// a filler always has a carrier on both sides.
struct UttPlan {
  std::vector<std::string> pre;
  int filler_pos = 0;
  int filler = -1;
  int entity = -1;
  bool repeat = false;
};

void check_config(const SynthConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.train_dialogues < 1 || c.eval_dialogues < 1) fail("dialogue counts must be >= 1");
  if (c.utterances_per_dialogue < 1) fail("utterances_per_dialogue must be >= 1");
  if (c.carrier_words < 1) fail("carrier_words must be >= 1");
  if (c.num_entities < 4 || c.num_entities % 2 != 0)
    fail("num_entities must be even and >= 4");
  if (c.num_fillers < 2 || c.num_fillers % 2 != 0)
    fail("num_fillers must be even and >= 2");
  if (c.carrier_min < 2 || c.carrier_min > c.carrier_max)
    fail("need 2 <= carrier_min <= carrier_max");
  if (c.entity_repeat_prob < 0.0 || c.entity_repeat_prob > 1.0)
    fail("entity_repeat_prob must be in [0, 1]");
  if (c.filler_slot_prob < 0.0 || c.filler_slot_prob > 1.0)
    fail("filler_slot_prob must be in [0, 1]");
  if (c.repeat_margin_lo < 0.0 || c.repeat_margin_lo > c.repeat_margin_hi)
    fail("need 0 <= repeat_margin_lo <= repeat_margin_hi");
  if (c.safe_margin_lo < 0.0 || c.safe_margin_lo > c.safe_margin_hi)
    fail("need 0 <= safe_margin_lo <= safe_margin_hi");
  if (c.filler_margin < 0.0) fail("filler_margin must be >= 0");
}

std::vector<UttPlan> plan_dialogue(const SynthConfig& c, std::mt19937_64& rng) {
  std::vector<UttPlan> plans;
  plans.reserve(static_cast<size_t>(c.utterances_per_dialogue));
  int prev_entity = -1;
  for (int u = 0; u < c.utterances_per_dialogue; ++u) {
    UttPlan p;
    int m = c.carrier_min + rand_int(rng, c.carrier_max - c.carrier_min + 1);
    for (int j = 0; j < m; ++j)
      p.pre.push_back("w" + std::to_string(rand_int(rng, c.carrier_words)));
    if (rand_unit(rng) < c.filler_slot_prob) {
      p.filler = rand_int(rng, c.num_fillers);
      int pos = 1 + rand_int(rng, m - 1);  // insertion index: carrier on both sides
      p.pre.insert(p.pre.begin() + pos, "f" + std::to_string(p.filler));
      p.filler_pos = pos + 1;
    }
    p.repeat = prev_entity >= 0 && rand_unit(rng) < c.entity_repeat_prob;
    if (p.repeat) {
      p.entity = prev_entity;
    } else {
      // A fresh entity is never the previous one, nor its confusable partner:
      // otherwise recurrence cues could push toward the wrong branch.
      std::vector<int> allowed;
      for (int e = 0; e < c.num_entities; ++e)
        if (e != prev_entity && e != (prev_entity ^ 1)) allowed.push_back(e);
      p.entity = allowed[static_cast<size_t>(rand_int(rng, static_cast<int>(allowed.size())))];
    }
    prev_entity = p.entity;
    plans.push_back(std::move(p));
  }
  return plans;
}

DialogueTurn plan_to_turn(const SynthConfig& c, const UttPlan& p, int u) {
  DialogueTurn turn;
  turn.speaker = (u % 2 == 0) ? "A" : "B";
  if (!c.intents.empty())
    turn.intent = c.intents[static_cast<size_t>(u) % c.intents.size()];
  turn.words = p.pre;
  turn.words.push_back("e" + std::to_string(p.entity));
  return turn;
}

// Sausage lattice around the reference: a backbone spelling the reference,
// an optional filler branch, and a final entity slot that forks to separate
// final states.  Graph costs replay `lm` along each path exactly (every
// state is entered under a single word label, so with order 2 the per-arc
// score is path-independent); acoustic costs carry only the branch margins.
Lattice build_utt_lattice(const SynthConfig& c, const UttPlan& p,
                          const NgramModel& lm, const Vocabulary& vocab,
                          std::mt19937_64& rng) {
  Lattice lat;
  const int P = static_cast<int>(p.pre.size());
  lat.add_states(P + 1);
  lat.set_start(0);

  std::vector<NgramStateId> chain(static_cast<size_t>(P) + 1);
  chain[0] = lm.begin_state();
  for (int j = 1; j <= P; ++j) {
    TokenId w = vocab.require(p.pre[static_cast<size_t>(j - 1)]);
    auto [cost, next] = lm.score_word(chain[static_cast<size_t>(j - 1)], w);
    lat.add_arc({j - 1, j, w, {cost, 0.0}});
    chain[static_cast<size_t>(j)] = next;
  }

  if (p.filler_pos > 0) {
    const int fp = p.filler_pos;  // 1-based; fp <= P - 1 by construction
    StateId alt = lat.add_state();
    TokenId falt = vocab.require("f" + std::to_string(p.filler ^ 1));
    auto [fcost, fstate] = lm.score_word(chain[static_cast<size_t>(fp - 1)], falt);
    lat.add_arc({fp - 1, alt, falt, {fcost, c.filler_margin}});
    TokenId nxt = vocab.require(p.pre[static_cast<size_t>(fp)]);
    auto [ncost, nstate] = lm.score_word(fstate, nxt);
    (void)nstate;
    lat.add_arc({alt, fp + 1, nxt, {ncost, 0.0}});
  }

  StateId fin_ref = lat.add_state();
  StateId fin_alt = lat.add_state();
  TokenId ent = vocab.require("e" + std::to_string(p.entity));
  TokenId ent_alt = vocab.require("e" + std::to_string(p.entity ^ 1));
  auto [ref_cost, ref_state] = lm.score_word(chain[static_cast<size_t>(P)], ent);
  auto [alt_cost, alt_state] = lm.score_word(chain[static_cast<size_t>(P)], ent_alt);
  double margin = p.repeat ? rand_range(rng, c.repeat_margin_lo, c.repeat_margin_hi)
                           : rand_range(rng, c.safe_margin_lo, c.safe_margin_hi);
  lat.add_arc({P, fin_ref, ent, {ref_cost, p.repeat ? margin : 0.0}});
  lat.add_arc({P, fin_alt, ent_alt, {alt_cost, p.repeat ? 0.0 : margin}});
  lat.set_final(fin_ref, lm.end_cost(ref_state));
  lat.set_final(fin_alt, lm.end_cost(alt_state));
  lat.validate();
  return lat;
}

}  // namespace

SynthDataset generate_synthetic_conversations(const SynthConfig& config) {
  check_config(config);
  std::mt19937_64 rng(config.seed);

  SynthDataset ds;
  ds.vocab = std::make_shared<Vocabulary>();
  Vocabulary& vocab = *ds.vocab;
  vocab.add("<s>");
  vocab.add("</s>");
  vocab.add("<unk>");
  vocab.add("SP");
  vocab.add("SID_A");
  vocab.add("SID_B");
  for (const auto& intent : config.intents) vocab.add("INT_" + intent);
  for (int i = 0; i < config.carrier_words; ++i) vocab.add("w" + std::to_string(i));
  for (int i = 0; i < config.num_entities; ++i) vocab.add("e" + std::to_string(i));
  for (int i = 0; i < config.num_fillers; ++i) vocab.add("f" + std::to_string(i));

  for (int d = 0; d < config.train_dialogues; ++d) {
    Dialogue dia;
    auto plans = plan_dialogue(config, rng);
    for (size_t u = 0; u < plans.size(); ++u)
      dia.turns.push_back(plan_to_turn(config, plans[u], static_cast<int>(u)));
    ds.train.dialogues.push_back(std::move(dia));
  }

  std::vector<std::vector<UttPlan>> eval_plans;
  eval_plans.reserve(static_cast<size_t>(config.eval_dialogues));
  for (int d = 0; d < config.eval_dialogues; ++d) {
    Dialogue dia;
    auto plans = plan_dialogue(config, rng);
    for (size_t u = 0; u < plans.size(); ++u)
      dia.turns.push_back(plan_to_turn(config, plans[u], static_cast<int>(u)));
    ds.eval.dialogues.push_back(std::move(dia));
    eval_plans.push_back(std::move(plans));
  }

  ConcatOptions per_turn;
  per_turn.k = 1;
  ds.first_pass_lm = train_addone_ngram(
      corpus_to_ids(build_concat_corpus(ds.train, per_turn), vocab),
      kFirstPassOrder, vocab);

  for (int d = 0; d < config.eval_dialogues; ++d) {
    Conversation conv;
    conv.conv_id = "conv" + std::to_string(d);
    const Dialogue& dia = ds.eval.dialogues[static_cast<size_t>(d)];
    for (size_t u = 0; u < eval_plans[static_cast<size_t>(d)].size(); ++u) {
      const UttPlan& plan = eval_plans[static_cast<size_t>(d)][u];
      const DialogueTurn& turn = dia.turns[u];
      Utterance utt;
      utt.conv_id = conv.conv_id;
      utt.utt_index = static_cast<int>(u);
      utt.speaker = turn.speaker;
      utt.intent = turn.intent;
      std::string text;
      for (const auto& w : turn.words) {
        if (!text.empty()) text += ' ';
        text += w;
      }
      utt.ref_text = text;
      utt.lattice_path =
          "lattices/" + conv.conv_id + "_u" + std::to_string(u) + ".lat";
      ds.lattice_index[utt.lattice_path] = ds.lattices.size();
      ds.lattices.push_back(
          build_utt_lattice(config, plan, ds.first_pass_lm, vocab, rng));
      conv.utterances.push_back(std::move(utt));
    }
    ds.conversations.push_back(std::move(conv));
  }
  return ds;
}

}  // namespace convlat
