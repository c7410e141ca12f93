#include <algorithm>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "convlat/eval.hpp"

namespace convlat {

using nlohmann::json;

CerReport cer(const std::vector<TokenId>& ref, const std::vector<TokenId>& hyp) {
  const size_t R = ref.size(), H = hyp.size();
  const size_t W = H + 1;
  std::vector<int> dp((R + 1) * W);
  for (size_t j = 0; j <= H; ++j) dp[j] = static_cast<int>(j);
  for (size_t i = 1; i <= R; ++i) {
    dp[i * W] = static_cast<int>(i);
    for (size_t j = 1; j <= H; ++j) {
      int diag = dp[(i - 1) * W + (j - 1)] + (ref[i - 1] != hyp[j - 1] ? 1 : 0);
      int del = dp[(i - 1) * W + j] + 1;
      int ins = dp[i * W + (j - 1)] + 1;
      dp[i * W + j] = std::min({diag, del, ins});
    }
  }

  CerReport rep;
  rep.ref_len = static_cast<long>(R);
  size_t i = R, j = H;
  while (i > 0 || j > 0) {
    int here = dp[i * W + j];
    if (i > 0 && j > 0 &&
        here == dp[(i - 1) * W + (j - 1)] + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) ++rep.substitutions;
      --i;
      --j;
    } else if (i > 0 && here == dp[(i - 1) * W + j] + 1) {
      ++rep.deletions;
      --i;
    } else {
      ++rep.insertions;
      --j;
    }
  }
  if (R > 0) {
    rep.cer_defined = true;
    rep.cer = static_cast<double>(rep.substitutions + rep.insertions +
                                  rep.deletions) /
              static_cast<double>(R);
  }
  return rep;
}

CerReport pool_cer(const std::vector<CerReport>& parts) {
  CerReport pooled;
  for (const CerReport& p : parts) {
    pooled.substitutions += p.substitutions;
    pooled.insertions += p.insertions;
    pooled.deletions += p.deletions;
    pooled.ref_len += p.ref_len;
  }
  if (pooled.ref_len > 0) {
    pooled.cer_defined = true;
    pooled.cer = static_cast<double>(pooled.substitutions + pooled.insertions +
                                     pooled.deletions) /
                 static_cast<double>(pooled.ref_len);
  }
  return pooled;
}

namespace {

struct OracleSearch {
  const Lattice& lat;
  const DifferenceLm& lm;
  double lm_scale;
  OraclePath best;
  std::vector<int> arcs;
  std::vector<TokenId> words;

  void consider(StateId s, const DifferenceLm::State& st, double graph,
                double acoustic) {
    double g = graph + lat.final_cost(s) + lm.end_delta(st);
    double total = lm_scale * g + acoustic;
    bool take = total < best.total_cost;
    if (!take && total == best.total_cost)
      take = std::lexicographical_compare(words.begin(), words.end(),
                                          best.words.begin(), best.words.end());
    if (take) {
      best.words = words;
      best.arc_indices = arcs;
      best.graph_cost = g;
      best.acoustic_cost = acoustic;
      best.total_cost = total;
    }
  }

  void visit(StateId s, const DifferenceLm::State& st, double graph,
             double acoustic) {
    if (lat.is_final(s)) consider(s, st, graph, acoustic);
    for (int ai : lat.out_arcs(s)) {
      const Arc& a = lat.arcs()[static_cast<size_t>(ai)];
      auto [delta, next] = lm.step_delta(st, a.word);
      arcs.push_back(ai);
      bool real_word = a.word != kEpsToken;
      if (real_word) words.push_back(a.word);
      visit(a.dst, next, graph + a.cost.graph + delta,
            acoustic + a.cost.acoustic);
      if (real_word) words.pop_back();
      arcs.pop_back();
    }
  }
};

}  // namespace

OraclePath oracle_rescore_nbest(const Lattice& lattice, const DifferenceLm& lm,
                                double lm_scale, long long budget) {
  if (!lattice.validated())
    throw InvalidLatticeError("oracle rescoring requires a validated lattice");
  if (count_paths(lattice, budget + 1) > budget)
    throw BudgetExceededError("lattice exceeds the oracle path budget of " +
                              std::to_string(budget));
  OracleSearch search{lattice, lm, lm_scale, {}, {}, {}};
  search.visit(lattice.start(), lm.begin(), 0.0, 0.0);
  return std::move(search.best);
}

namespace {

HypRecord first_pass_record(const Utterance& utt, const Lattice& lat,
                            const Vocabulary& vocab, double lm_scale) {
  BestPath bp = best_path(lat, lm_scale);
  HypRecord rec;
  rec.conv_id = utt.conv_id;
  rec.utt_index = utt.utt_index;
  rec.hypothesis = join_tokens(vocab, bp.words);
  Cost sum;
  for (int ai : bp.arc_indices) {
    sum.graph += lat.arcs()[static_cast<size_t>(ai)].cost.graph;
    sum.acoustic += lat.arcs()[static_cast<size_t>(ai)].cost.acoustic;
  }
  rec.graph_cost = sum.graph + lat.final_cost(bp.end_state);
  rec.acoustic_cost = sum.acoustic;
  rec.total_cost = lm_scale * rec.graph_cost + rec.acoustic_cost;
  return rec;
}

}  // namespace

GridReport run_grid(const std::vector<Conversation>& convs,
                    const LatticeProvider& lattice_by_path,
                    const Vocabulary& vocab, const GridSpec& spec) {
  GridReport report;
  for (const GridCondition& cond : spec.conditions) {
    GridRow row;
    row.name = cond.name;
    if (cond.first_pass_only) {
      for (const Conversation& conv : convs)
        for (const Utterance& utt : conv.utterances)
          row.hyps.push_back(first_pass_record(
              utt, lattice_by_path(utt.lattice_path), vocab, spec.lm_scale));
    } else {
      if (!cond.lm)
        throw ConfigError("grid condition \"" + cond.name +
                          "\" has no language model");
      row.hyps =
          rescore_with_context(convs, lattice_by_path, *cond.lm, vocab,
                               cond.policy, spec.n, spec.beam, spec.lm_scale,
                               spec.jobs);
    }

    std::vector<CerReport> parts;
    size_t idx = 0;
    for (const Conversation& conv : convs) {
      for (const Utterance& utt : conv.utterances) {
        const HypRecord& rec = row.hyps[idx];
        parts.push_back(cer(tokenize(vocab, utt.ref_text),
                            tokenize(vocab, rec.hypothesis)));
        if (rec.concatenated) ++row.concatenated;
        ++idx;
      }
    }
    row.utterances = static_cast<long>(idx);
    row.pooled = pool_cer(parts);
    report.rows.push_back(std::move(row));
  }

  auto baseline_cer = [&](const std::string& name) -> double {
    for (const GridRow& row : report.rows)
      if (row.name == name && row.pooled.cer_defined) return row.pooled.cer;
    return 0.0;
  };
  const double first = baseline_cer("first_pass");
  const double plain = baseline_cer("plain");
  for (GridRow& row : report.rows) {
    if (first > 0.0) row.rel_vs_first_pass = (first - row.pooled.cer) / first;
    if (plain > 0.0) row.rel_vs_plain = (plain - row.pooled.cer) / plain;
  }
  return report;
}

void write_grid_report_json(const GridReport& report, std::ostream& out) {
  json rows = json::array();
  for (const GridRow& row : report.rows) {
    rows.push_back({{"name", row.name},
                    {"utterances", row.utterances},
                    {"concatenated", row.concatenated},
                    {"ref_len", row.pooled.ref_len},
                    {"substitutions", row.pooled.substitutions},
                    {"insertions", row.pooled.insertions},
                    {"deletions", row.pooled.deletions},
                    {"cer", row.pooled.cer},
                    {"cer_defined", row.pooled.cer_defined},
                    {"rel_reduction_vs_first_pass", row.rel_vs_first_pass},
                    {"rel_reduction_vs_plain", row.rel_vs_plain}});
  }
  out << json{{"conditions", rows}}.dump(2) << "\n";
}

void write_grid_report_tsv(const GridReport& report, std::ostream& out) {
  out << "condition\tutterances\tconcatenated\tref_len\tsubstitutions"
         "\tinsertions\tdeletions\tcer\trel_vs_first_pass\trel_vs_plain\n";
  out << std::setprecision(10);
  for (const GridRow& row : report.rows) {
    out << row.name << '\t' << row.utterances << '\t' << row.concatenated
        << '\t' << row.pooled.ref_len << '\t' << row.pooled.substitutions
        << '\t' << row.pooled.insertions << '\t' << row.pooled.deletions
        << '\t' << row.pooled.cer << '\t' << row.rel_vs_first_pass << '\t'
        << row.rel_vs_plain << "\n";
  }
}

void write_grid_hyps(const GridReport& report, std::ostream& out) {
  for (const GridRow& row : report.rows) {
    for (const HypRecord& h : row.hyps) {
      json j{{"condition", row.name},
             {"conv_id", h.conv_id},
             {"utt_index", h.utt_index},
             {"hypothesis", h.hypothesis},
             {"similarity", h.similarity},
             {"concatenated", h.concatenated},
             {"costs",
              {{"graph", h.graph_cost},
               {"acoustic", h.acoustic_cost},
               {"total", h.total_cost}}}};
      out << j.dump() << "\n";
    }
  }
}

}  // namespace convlat
