#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convlat/context.hpp"
#include "convlat/conversation.hpp"
#include "convlat/errors.hpp"
#include "convlat/eval.hpp"
#include "convlat/lattice.hpp"
#include "convlat/ngram_lm.hpp"
#include "convlat/rescore.hpp"
#include "convlat/rnnlm.hpp"
#include "convlat/sequence_lm.hpp"
#include "convlat/textprep.hpp"
#include "convlat/tfidf.hpp"
#include "convlat/vocab.hpp"

namespace fs = std::filesystem;
using namespace convlat;

namespace {

int default_jobs() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

TagKind parse_tag(const std::string& name) {
  if (name == "none") return TagKind::none;
  if (name == "sp") return TagKind::sp;
  if (name == "sid") return TagKind::sid;
  if (name == "intent") return TagKind::intent;
  throw ConfigError("unknown tag kind: " + name);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary: " + path);
  return Vocabulary::read_text(in);
}

std::vector<std::vector<TokenId>> load_corpus(const std::string& path,
                                              const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus: " + path);
  std::vector<std::vector<TokenId>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto ids = tokenize(vocab, line);
    if (!ids.empty()) corpus.push_back(std::move(ids));
  }
  return corpus;
}

NgramModel load_arpa_file(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ARPA file: " + path);
  return NgramModel::load_arpa(in, vocab);
}

RnnLm<float> load_rnn_file(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path);
  return RnnLm<float>::load(in, vocab);
}

// Loads every lattice a conversation set references, keyed by lattice_path.
std::unordered_map<std::string, Lattice> preload_lattices(
    const std::vector<Conversation>& convs, const std::string& dir,
    const Vocabulary& vocab) {
  std::unordered_map<std::string, Lattice> store;
  for (const Conversation& conv : convs) {
    for (const Utterance& utt : conv.utterances) {
      if (store.count(utt.lattice_path)) continue;
      fs::path full = fs::path(dir) / utt.lattice_path;
      store.emplace(utt.lattice_path, read_lattice_file(full.string(), vocab));
    }
  }
  return store;
}

LatticeProvider provider_for(const std::unordered_map<std::string, Lattice>& store) {
  return [&store](const std::string& path) -> const Lattice& {
    auto it = store.find(path);
    if (it == store.end()) throw Error("no lattice loaded for " + path);
    return it->second;
  };
}

std::string format_tau(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", tau);
  return buf;
}

struct TextprepArgs {
  std::string conversations, out_corpus, out_vocab;
  std::string tag = "none";
  int k = 4;
  bool block = false;
  bool tag_from_later = false;
};

void run_textprep(const TextprepArgs& args) {
  DialogueCorpus dialogues =
      corpus_from_conversations(read_conversations_file(args.conversations));
  ConcatOptions opts;
  opts.k = args.k;
  opts.tag = parse_tag(args.tag);
  opts.cyclic = !args.block;
  opts.tag_from_earlier = !args.tag_from_later;
  auto sequences = build_concat_corpus(dialogues, opts);

  std::ofstream out(args.out_corpus);
  if (!out) throw Error("cannot write corpus: " + args.out_corpus);
  for (const auto& seq : sequences) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
  std::cout << "wrote " << sequences.size() << " sequences to "
            << args.out_corpus << "\n";

  if (!args.out_vocab.empty()) {
    std::vector<TagKind> kinds;
    if (opts.tag != TagKind::none) kinds.push_back(opts.tag);
    Vocabulary vocab = build_vocab(dialogues, kinds);
    std::ofstream vout(args.out_vocab);
    if (!vout) throw Error("cannot write vocabulary: " + args.out_vocab);
    vocab.write_text(vout);
    std::cout << "wrote " << vocab.size() << " tokens to " << args.out_vocab
              << "\n";
  }
}

struct TrainArgs {
  std::string corpus, vocab, out, heldout;
  std::string kind = "rnn";
  std::string cell = "gated";
  int order = 4;
  int embed = 32, hidden = 64, layers = 1, bptt = 16, epochs = 5;
  double lr = 0.1;
  std::uint64_t seed = 1;
};

void run_train(const TrainArgs& args) {
  Vocabulary vocab = load_vocab(args.vocab);
  auto corpus = load_corpus(args.corpus, vocab);
  if (args.kind == "ngram") {
    NgramModel model = train_addone_ngram(corpus, args.order, vocab);
    std::ofstream out(args.out);
    if (!out) throw Error("cannot write model: " + args.out);
    model.write_arpa(out);
    std::cout << "wrote order-" << args.order << " model to " << args.out
              << "\n";
    return;
  }
  if (args.kind != "rnn") throw ConfigError("unknown model kind: " + args.kind);

  RnnLmConfig cfg;
  cfg.embed_dim = args.embed;
  cfg.hidden_dim = args.hidden;
  cfg.num_layers = args.layers;
  cfg.cell = args.cell == "simple" ? CellKind::simple : CellKind::gated;
  cfg.bptt = args.bptt;
  cfg.learning_rate = args.lr;
  cfg.epochs = args.epochs;
  cfg.seed = args.seed;

  std::vector<std::vector<TokenId>> heldout;
  if (!args.heldout.empty()) heldout = load_corpus(args.heldout, vocab);

  RnnLm<float> lm(cfg, vocab);
  TrainReport report = lm.train(corpus, heldout);
  for (size_t e = 0; e < report.epoch_train_ppl.size(); ++e)
    std::cout << "epoch " << e + 1 << " train_ppl "
              << report.epoch_train_ppl[e] << "\n";
  if (!heldout.empty())
    std::cout << "heldout_ppl " << report.heldout_ppl << "\n";

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw Error("cannot write model: " + args.out);
  lm.save(out);
  std::cout << "wrote model to " << args.out << "\n";
}

struct RescoreArgs {
  std::string conversations, lattice_dir, vocab, subtract_arpa;
  std::string rnn, add_arpa;
  std::string out, stats_out;
  std::string tag = "none";
  int n = 4;
  double beam = 15.0;
  double lm_scale = 1.0;
  double weight = 1.0;
  double tau = 0.0;
  bool has_tau = false;
  int context_depth = 1;
  int jobs = default_jobs();
};

void run_rescore(const RescoreArgs& args) {
  if (args.rnn.empty() == args.add_arpa.empty())
    throw ConfigError("give exactly one of --rnn and --add-arpa");
  Vocabulary vocab = load_vocab(args.vocab);
  auto convs = read_conversations_file(args.conversations);
  auto store = preload_lattices(convs, args.lattice_dir, vocab);

  NgramModel subtract = load_arpa_file(args.subtract_arpa, vocab);
  std::optional<RnnLm<float>> rnn;
  std::optional<NgramModel> add_ngram;
  std::unique_ptr<SequenceLm> add;
  if (!args.rnn.empty()) {
    rnn.emplace(load_rnn_file(args.rnn, vocab));
    add = std::make_unique<RnnSequenceLm>(*rnn);
  } else {
    add_ngram.emplace(load_arpa_file(args.add_arpa, vocab));
    add = std::make_unique<NgramSequenceLm>(*add_ngram);
  }
  DifferenceLm lm(&subtract, add.get(), args.weight);

  ConcatPolicy policy;
  policy.tag = parse_tag(args.tag);
  if (args.has_tau) policy.tau = args.tau;
  policy.context_depth = args.context_depth;

  std::vector<RescoreStats> stats;
  auto records =
      rescore_with_context(convs, provider_for(store), lm, vocab, policy,
                           args.n, args.beam, args.lm_scale, args.jobs, &stats);
  write_hyps_file(records, args.out);

  long concatenated = 0, expanded = 0, pruned = 0;
  for (const auto& rec : records) concatenated += rec.concatenated ? 1 : 0;
  for (const auto& st : stats) {
    expanded += st.states_expanded;
    pruned += st.states_pruned;
  }
  std::cout << "rescored " << records.size() << " utterances ("
            << concatenated << " concatenated, " << expanded
            << " states expanded, " << pruned << " pruned) to " << args.out
            << "\n";

  if (!args.stats_out.empty()) {
    std::ofstream sout(args.stats_out);
    if (!sout) throw Error("cannot write stats: " + args.stats_out);
    for (size_t i = 0; i < stats.size(); ++i) {
      nlohmann::json j{{"conv_id", records[i].conv_id},
                       {"utt_index", records[i].utt_index},
                       {"states_expanded", stats[i].states_expanded},
                       {"states_pruned", stats[i].states_pruned},
                       {"reexpansions", stats[i].reexpansions},
                       {"composed_states", stats[i].composed_states}};
      sout << j.dump() << "\n";
    }
  }
}

struct EvalArgs {
  std::string conversations, vocab;
  std::vector<std::string> hyps;
  std::string out_json, out_tsv;
  // grid mode
  bool grid = false;
  std::string lattice_dir, subtract_arpa, plain_rnn, tag_rnn, out_dir;
  std::string tag = "sp";
  std::vector<double> taus{0.0, 0.1, 0.3, 0.5, 0.9};
  int n = 4;
  double beam = 15.0;
  double lm_scale = 1.0;
  double weight = 1.0;
  int jobs = default_jobs();
};

GridReport score_hyp_files(const EvalArgs& args,
                           const std::vector<Conversation>& convs,
                           const Vocabulary& vocab) {
  if (args.hyps.empty()) throw ConfigError("no hypothesis files given");
  GridReport report;
  for (const std::string& path : args.hyps) {
    GridRow row;
    row.name = fs::path(path).stem().string();
    auto records = read_hyps_file(path);
    std::unordered_map<std::string, const HypRecord*> by_key;
    for (const auto& rec : records)
      by_key[rec.conv_id + "#" + std::to_string(rec.utt_index)] = &rec;
    std::vector<CerReport> parts;
    for (const Conversation& conv : convs) {
      for (const Utterance& utt : conv.utterances) {
        auto it =
            by_key.find(utt.conv_id + "#" + std::to_string(utt.utt_index));
        if (it == by_key.end())
          throw Error("no hypothesis for " + utt.conv_id + " utterance " +
                      std::to_string(utt.utt_index) + " in " + path);
        const HypRecord& rec = *it->second;
        parts.push_back(cer(tokenize(vocab, utt.ref_text),
                            tokenize(vocab, rec.hypothesis)));
        if (rec.concatenated) ++row.concatenated;
        ++row.utterances;
        row.hyps.push_back(rec);
      }
    }
    row.pooled = pool_cer(parts);
    report.rows.push_back(std::move(row));
  }
  auto baseline = [&](const std::string& name) -> double {
    for (const GridRow& row : report.rows)
      if (row.name == name && row.pooled.cer_defined) return row.pooled.cer;
    return 0.0;
  };
  double first = baseline("first_pass"), plain = baseline("plain");
  for (GridRow& row : report.rows) {
    if (first > 0.0) row.rel_vs_first_pass = (first - row.pooled.cer) / first;
    if (plain > 0.0) row.rel_vs_plain = (plain - row.pooled.cer) / plain;
  }
  return report;
}

GridReport run_eval_grid(const EvalArgs& args,
                         const std::vector<Conversation>& convs,
                         const Vocabulary& vocab) {
  if (args.lattice_dir.empty() || args.subtract_arpa.empty() ||
      args.plain_rnn.empty() || args.tag_rnn.empty())
    throw ConfigError(
        "--grid needs --lattice-dir, --subtract-arpa, --plain-rnn and "
        "--tag-rnn");
  TagKind kind = parse_tag(args.tag);
  if (kind == TagKind::none) throw ConfigError("--grid needs a real tag kind");

  auto store = preload_lattices(convs, args.lattice_dir, vocab);
  NgramModel subtract = load_arpa_file(args.subtract_arpa, vocab);
  RnnLm<float> plain_rnn = load_rnn_file(args.plain_rnn, vocab);
  RnnLm<float> tag_rnn = load_rnn_file(args.tag_rnn, vocab);
  RnnSequenceLm plain_seq(plain_rnn), tag_seq(tag_rnn);
  DifferenceLm plain_lm(&subtract, &plain_seq, args.weight);
  DifferenceLm tag_lm(&subtract, &tag_seq, args.weight);

  GridSpec spec;
  spec.n = args.n;
  spec.beam = args.beam;
  spec.lm_scale = args.lm_scale;
  spec.jobs = args.jobs;
  spec.conditions.push_back({"first_pass", {}, true, nullptr});
  spec.conditions.push_back({"plain", {}, false, &plain_lm});
  ConcatPolicy none_policy;
  spec.conditions.push_back(
      {args.tag + "_noconcat", none_policy, false, &tag_lm});
  ConcatPolicy always;
  always.tag = kind;
  spec.conditions.push_back({args.tag + "_always", always, false, &tag_lm});
  for (double tau : args.taus) {
    ConcatPolicy gated = always;
    gated.tau = tau;
    spec.conditions.push_back(
        {args.tag + "_tau_" + format_tau(tau), gated, false, &tag_lm});
  }
  return run_grid(convs, provider_for(store), vocab, spec);
}

void run_eval(const EvalArgs& args) {
  Vocabulary vocab = load_vocab(args.vocab);
  auto convs = read_conversations_file(args.conversations);
  GridReport report = args.grid ? run_eval_grid(args, convs, vocab)
                                : score_hyp_files(args, convs, vocab);

  write_grid_report_tsv(report, std::cout);
  if (!args.out_json.empty()) {
    std::ofstream out(args.out_json);
    if (!out) throw Error("cannot write report: " + args.out_json);
    write_grid_report_json(report, out);
  }
  if (!args.out_tsv.empty()) {
    std::ofstream out(args.out_tsv);
    if (!out) throw Error("cannot write report: " + args.out_tsv);
    write_grid_report_tsv(report, out);
  }
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    std::ofstream jout(fs::path(args.out_dir) / "grid_report.json");
    write_grid_report_json(report, jout);
    std::ofstream tout(fs::path(args.out_dir) / "grid_report.tsv");
    write_grid_report_tsv(report, tout);
    std::ofstream hout(fs::path(args.out_dir) / "hyps.jsonl");
    write_grid_hyps(report, hout);
    std::cout << "wrote grid reports to " << args.out_dir << "\n";
  }
}

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

void run_synth(const SynthArgs& args) {
  SynthDataset ds = generate_synthetic_conversations(args.cfg);
  const Vocabulary& vocab = *ds.vocab;
  fs::create_directories(args.out);

  {
    std::ofstream vout(fs::path(args.out) / "vocab.txt");
    if (!vout) throw Error("cannot write vocabulary under " + args.out);
    vocab.write_text(vout);
  }
  {
    std::ofstream aout(fs::path(args.out) / "first_pass.arpa");
    if (!aout) throw Error("cannot write ARPA model under " + args.out);
    ds.first_pass_lm.write_arpa(aout);
  }

  std::vector<Conversation> train_convs;
  for (size_t d = 0; d < ds.train.dialogues.size(); ++d) {
    Conversation conv;
    conv.conv_id = "train" + std::to_string(d);
    const Dialogue& dia = ds.train.dialogues[d];
    for (size_t u = 0; u < dia.turns.size(); ++u) {
      const DialogueTurn& turn = dia.turns[u];
      Utterance utt;
      utt.conv_id = conv.conv_id;
      utt.utt_index = static_cast<int>(u);
      utt.speaker = turn.speaker;
      utt.intent = turn.intent;
      for (const auto& w : turn.words) {
        if (!utt.ref_text.empty()) utt.ref_text += ' ';
        utt.ref_text += w;
      }
      conv.utterances.push_back(std::move(utt));
    }
    train_convs.push_back(std::move(conv));
  }
  write_conversations_file(train_convs,
                           (fs::path(args.out) / "train.jsonl").string());
  write_conversations_file(ds.conversations,
                           (fs::path(args.out) / "eval.jsonl").string());

  size_t lattice_count = 0;
  for (const Conversation& conv : ds.conversations) {
    for (const Utterance& utt : conv.utterances) {
      fs::path full = fs::path(args.out) / utt.lattice_path;
      fs::create_directories(full.parent_path());
      write_lattice_file(ds.lattices[ds.lattice_index.at(utt.lattice_path)],
                         vocab, full.string());
      ++lattice_count;
    }
  }
  std::cout << "wrote " << ds.train.dialogues.size() << " train dialogues, "
            << ds.conversations.size() << " eval conversations, "
            << lattice_count << " lattices under " << args.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversation-context lattice rescoring toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value config file; command-line flags win");

  TextprepArgs tp;
  auto* tp_cmd = app.add_subcommand(
      "textprep", "Build concatenated training text from dialogue JSONL");
  tp_cmd->add_option("--conversations", tp.conversations, "dialogue JSONL")
      ->required();
  tp_cmd->add_option("--out-corpus", tp.out_corpus, "output text, one sequence per line")
      ->required();
  tp_cmd->add_option("--out-vocab", tp.out_vocab, "also write the corpus vocabulary here")
      ->capture_default_str();
  tp_cmd->add_option("--k", tp.k, "utterances per concatenated sequence")
      ->capture_default_str();
  tp_cmd->add_option("--tag", tp.tag, "junction tag kind: none|sp|sid|intent")
      ->check(CLI::IsMember({"none", "sp", "sid", "intent"}))
      ->capture_default_str();
  tp_cmd->add_flag("--block", tp.block, "disjoint blocks instead of cyclic windows");
  tp_cmd->add_flag("--tag-from-later", tp.tag_from_later,
                   "name junction tags after the later utterance");
  tp_cmd->callback([&tp] { run_textprep(tp); });

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a language model");
  tr_cmd->add_option("--corpus", tr.corpus, "training text")->required();
  tr_cmd->add_option("--vocab", tr.vocab, "vocabulary file")->required();
  tr_cmd->add_option("--out", tr.out, "output model path")->required();
  tr_cmd->add_option("--kind", tr.kind, "model kind: rnn|ngram")
      ->check(CLI::IsMember({"rnn", "ngram"}))
      ->capture_default_str();
  tr_cmd->add_option("--order", tr.order, "n-gram order (kind=ngram)")
      ->capture_default_str();
  tr_cmd->add_option("--embed", tr.embed, "embedding size")->capture_default_str();
  tr_cmd->add_option("--hidden", tr.hidden, "hidden size")->capture_default_str();
  tr_cmd->add_option("--layers", tr.layers, "recurrent layers")->capture_default_str();
  tr_cmd->add_option("--cell", tr.cell, "recurrent cell: gated|simple")
      ->check(CLI::IsMember({"gated", "simple"}))
      ->capture_default_str();
  tr_cmd->add_option("--bptt", tr.bptt, "truncated backprop span")->capture_default_str();
  tr_cmd->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
  tr_cmd->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
  tr_cmd->add_option("--seed", tr.seed, "initialization seed")->capture_default_str();
  tr_cmd->add_option("--heldout", tr.heldout, "held-out text for perplexity")
      ->capture_default_str();
  tr_cmd->callback([&tr] { run_train(tr); });

  RescoreArgs rs;
  auto* rs_cmd = app.add_subcommand(
      "rescore", "Rescore conversation lattices with a difference LM");
  rs_cmd->add_option("--conversations", rs.conversations, "conversation JSONL")
      ->required();
  rs_cmd->add_option("--lattice-dir", rs.lattice_dir,
                     "directory lattice paths are relative to")
      ->required();
  rs_cmd->add_option("--vocab", rs.vocab, "vocabulary file")->required();
  rs_cmd->add_option("--subtract-arpa", rs.subtract_arpa,
                     "first-pass n-gram to subtract")
      ->required();
  rs_cmd->add_option("--rnn", rs.rnn, "replacement RNN model");
  rs_cmd->add_option("--add-arpa", rs.add_arpa,
                     "replacement n-gram (instead of --rnn)");
  rs_cmd->add_option("--out", rs.out, "output hypothesis JSONL")->required();
  rs_cmd->add_option("--stats-out", rs.stats_out,
                     "per-utterance search stats JSONL")
      ->capture_default_str();
  rs_cmd->add_option("--n", rs.n, "history merge order")->capture_default_str();
  rs_cmd->add_option("--beam", rs.beam, "pruning beam")->capture_default_str();
  rs_cmd->add_option("--lm-scale", rs.lm_scale, "graph cost scale")
      ->capture_default_str();
  rs_cmd->add_option("--weight", rs.weight, "replacement LM weight")
      ->capture_default_str();
  rs_cmd->add_option("--tag", rs.tag,
                     "junction tag kind for context concatenation")
      ->check(CLI::IsMember({"none", "sp", "sid", "intent"}))
      ->capture_default_str();
  auto* tau_opt = rs_cmd->add_option(
      "--tau", rs.tau, "similarity gate threshold; omit to always concatenate");
  rs_cmd->add_option("--context-depth", rs.context_depth,
                     "previous utterances to chain")
      ->capture_default_str();
  rs_cmd->add_option("--jobs", rs.jobs, "worker threads (1 = serial)")
      ->capture_default_str();
  rs_cmd->callback([&rs, tau_opt] {
    rs.has_tau = tau_opt->count() > 0;
    run_rescore(rs);
  });

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand(
      "eval", "Score hypothesis files, or run the condition grid with --grid");
  ev_cmd->add_option("--conversations", ev.conversations,
                     "conversation JSONL with reference texts")
      ->required();
  ev_cmd->add_option("--vocab", ev.vocab, "vocabulary file")->required();
  ev_cmd->add_option("--hyps", ev.hyps, "hypothesis JSONL files to score")
      ->capture_default_str();
  ev_cmd->add_option("--out-json", ev.out_json, "write the report as JSON here")
      ->capture_default_str();
  ev_cmd->add_option("--out-tsv", ev.out_tsv, "write the report as TSV here")
      ->capture_default_str();
  ev_cmd->add_flag("--grid", ev.grid, "run the full condition grid");
  ev_cmd->add_option("--lattice-dir", ev.lattice_dir, "lattice directory (grid)")
      ->capture_default_str();
  ev_cmd->add_option("--subtract-arpa", ev.subtract_arpa,
                     "first-pass n-gram (grid)")
      ->capture_default_str();
  ev_cmd->add_option("--plain-rnn", ev.plain_rnn, "RNN trained without tags (grid)")
      ->capture_default_str();
  ev_cmd->add_option("--tag-rnn", ev.tag_rnn, "RNN trained with tags (grid)")
      ->capture_default_str();
  ev_cmd->add_option("--tag", ev.tag, "tag kind for grid conditions")
      ->check(CLI::IsMember({"sp", "sid", "intent"}))
      ->capture_default_str();
  ev_cmd->add_option("--taus", ev.taus, "similarity thresholds to sweep")
      ->delimiter(',')
      ->capture_default_str();
  ev_cmd->add_option("--out-dir", ev.out_dir,
                     "write grid_report.{json,tsv} and hyps.jsonl here")
      ->capture_default_str();
  ev_cmd->add_option("--n", ev.n, "history merge order")->capture_default_str();
  ev_cmd->add_option("--beam", ev.beam, "pruning beam")->capture_default_str();
  ev_cmd->add_option("--lm-scale", ev.lm_scale, "graph cost scale")
      ->capture_default_str();
  ev_cmd->add_option("--weight", ev.weight, "replacement LM weight")
      ->capture_default_str();
  ev_cmd->add_option("--jobs", ev.jobs, "worker threads (1 = serial)")
      ->capture_default_str();
  ev_cmd->callback([&ev] { run_eval(ev); });

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand(
      "synth", "Generate a deterministic synthetic conversation dataset");
  sy_cmd->add_option("--out", sy.out, "output directory")->required();
  sy_cmd->add_option("--train-dialogues", sy.cfg.train_dialogues,
                     "training dialogues")
      ->capture_default_str();
  sy_cmd->add_option("--eval-dialogues", sy.cfg.eval_dialogues,
                     "evaluation dialogues")
      ->capture_default_str();
  sy_cmd->add_option("--utterances", sy.cfg.utterances_per_dialogue,
                     "utterances per dialogue")
      ->capture_default_str();
  sy_cmd->add_option("--carriers", sy.cfg.carrier_words, "carrier word count")
      ->capture_default_str();
  sy_cmd->add_option("--entities", sy.cfg.num_entities,
                     "entity count (even, paired)")
      ->capture_default_str();
  sy_cmd->add_option("--fillers", sy.cfg.num_fillers,
                     "filler count (even, paired)")
      ->capture_default_str();
  sy_cmd->add_option("--carrier-min", sy.cfg.carrier_min,
                     "min carriers per utterance")
      ->capture_default_str();
  sy_cmd->add_option("--carrier-max", sy.cfg.carrier_max,
                     "max carriers per utterance")
      ->capture_default_str();
  sy_cmd->add_option("--repeat-prob", sy.cfg.entity_repeat_prob,
                     "entity repeat probability")
      ->capture_default_str();
  sy_cmd->add_option("--filler-prob", sy.cfg.filler_slot_prob,
                     "filler branch probability")
      ->capture_default_str();
  sy_cmd->add_option("--repeat-margin-lo", sy.cfg.repeat_margin_lo,
                     "low end of the wrong-way repeat margin")
      ->capture_default_str();
  sy_cmd->add_option("--repeat-margin-hi", sy.cfg.repeat_margin_hi,
                     "high end of the wrong-way repeat margin")
      ->capture_default_str();
  sy_cmd->add_option("--safe-margin-lo", sy.cfg.safe_margin_lo,
                     "low end of the fresh-mention margin")
      ->capture_default_str();
  sy_cmd->add_option("--safe-margin-hi", sy.cfg.safe_margin_hi,
                     "high end of the fresh-mention margin")
      ->capture_default_str();
  sy_cmd->add_option("--filler-margin", sy.cfg.filler_margin,
                     "margin against alternative fillers")
      ->capture_default_str();
  sy_cmd->add_option("--seed", sy.cfg.seed, "generation seed")
      ->capture_default_str();
  sy_cmd->callback([&sy] { run_synth(sy); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
