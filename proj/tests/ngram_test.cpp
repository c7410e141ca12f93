#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "convlat/ngram_lm.hpp"
#include "support/test_util.hpp"

using namespace convlat;
using namespace convlat::testing;

namespace {

constexpr double kLn10 = 2.302585092994045684;

/// Textbook back-off recursion straight off the entry table; shares no code
/// with score_word.
double backoff_cost_oracle(const NgramModel& m, std::vector<TokenId> ctx,
                           TokenId w) {
  double acc = 0.0;
  while (true) {
    std::vector<TokenId> gram = ctx;
    gram.push_back(w);
    if (const auto* e = m.find_entry(gram)) return acc + e->cost;
    REQUIRE(!ctx.empty());  // every probe word has a unigram here
    if (const auto* c = m.find_entry(ctx))
      if (c->has_backoff) acc += c->backoff_cost;
    ctx.erase(ctx.begin());
  }
}

std::vector<TokenId> successor_oracle(const NgramModel& m,
                                      std::vector<TokenId> hist, TokenId w) {
  hist.push_back(w);
  int max_len = m.order() - 1;
  int start = std::max(0, static_cast<int>(hist.size()) - max_len);
  for (int i = start; i < static_cast<int>(hist.size()); ++i) {
    std::vector<TokenId> suffix(hist.begin() + i, hist.end());
    if (m.has_entry(suffix)) return suffix;
  }
  return {};
}

struct Fixture {
  Vocabulary vocab = make_word_vocab(6);
  std::vector<std::vector<TokenId>> corpus;
  Fixture() {
    std::mt19937_64 rng(7);
    corpus = random_sentences(rng, vocab, 30, 1, 6);
  }
};

}  // namespace

TEST_CASE("trained model scores follow the back-off recursion") {
  Fixture fx;
  for (int order : {1, 2, 3}) {
    NgramModel m = train_addone_ngram(fx.corpus, order, fx.vocab);
    REQUIRE(m.order() == order);
    std::mt19937_64 rng(100 + order);
    auto probes = random_sentences(rng, fx.vocab, 20, 1, 8);
    for (const auto& sent : probes) {
      NgramStateId state = m.begin_state();
      for (TokenId w : sent) {
        double expect = backoff_cost_oracle(m, state.history, w);
        auto [cost, next] = m.score_word(state, w);
        CHECK(cost == doctest::Approx(expect).epsilon(1e-12));
        CHECK(next.history == successor_oracle(m, state.history, w));
        state = std::move(next);
      }
      double eos = backoff_cost_oracle(m, state.history, fx.vocab.eos());
      CHECK(m.end_cost(state) == doctest::Approx(eos).epsilon(1e-12));
    }
  }
}

TEST_CASE("every explicit history distributes exactly one unit of mass") {
  Fixture fx;
  for (int order : {1, 2, 3}) {
    NgramModel m = train_addone_ngram(fx.corpus, order, fx.vocab);
    auto histories = m.explicit_histories();
    REQUIRE(!histories.empty());
    for (const auto& h : histories) {
      NgramStateId state{h};
      double mass = std::exp(-m.end_cost(state));
      for (TokenId w = 1; w < fx.vocab.size(); ++w) {
        if (w == fx.vocab.bos() || w == fx.vocab.eos()) continue;
        mass += std::exp(-m.score_word(state, w).first);
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("sentence score is the sum of word steps plus the end cost") {
  Fixture fx;
  NgramModel m = train_addone_ngram(fx.corpus, 3, fx.vocab);
  std::mt19937_64 rng(9);
  for (const auto& sent : random_sentences(rng, fx.vocab, 10, 0, 7)) {
    NgramStateId state = m.begin_state();
    double total = 0.0;
    for (TokenId w : sent) {
      auto [cost, next] = m.score_word(state, w);
      total += cost;
      state = std::move(next);
    }
    total += m.end_cost(state);
    CHECK(m.score_sentence(sent) == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("start symbol carries the conventional dummy unigram") {
  Fixture fx;
  NgramModel m = train_addone_ngram(fx.corpus, 2, fx.vocab);
  const auto* bos = m.find_entry({fx.vocab.bos()});
  REQUIRE(bos != nullptr);
  CHECK(bos->cost == doctest::Approx(99.0 * kLn10).epsilon(1e-9));
  CHECK(m.begin_state().history == std::vector<TokenId>{fx.vocab.bos()});
}

TEST_CASE("arpa text round trips scores") {
  Fixture fx;
  NgramModel m = train_addone_ngram(fx.corpus, 3, fx.vocab);
  std::ostringstream text;
  m.write_arpa(text);
  std::istringstream back(text.str());
  NgramModel m2 = NgramModel::load_arpa(back, fx.vocab);
  CHECK(m2.order() == 3);
  std::mt19937_64 rng(12);
  for (const auto& sent : random_sentences(rng, fx.vocab, 20, 0, 7))
    CHECK(m2.score_sentence(sent) ==
          doctest::Approx(m.score_sentence(sent)).epsilon(1e-9));
}

namespace {

const char* kTinyArpa =
    "\\data\\\n"
    "ngram 1=5\n"
    "ngram 2=2\n"
    "\n"
    "\\1-grams:\n"
    "-99\t<s>\t-0.30103\n"
    "-0.60206\t</s>\n"
    "-0.47712\ta0\t-0.30103\n"
    "-0.60206\ta1\n"
    "-0.69897\t<unk>\n"
    "\n"
    "\\2-grams:\n"
    "-0.30103\t<s> a0\n"
    "-0.52288\ta0 a1\n"
    "\n"
    "\\end\\\n";

}  // namespace

TEST_CASE("hand-checked arpa probabilities") {
  Vocabulary v = make_word_vocab(2);
  std::istringstream in(kTinyArpa);
  NgramModel m = NgramModel::load_arpa(in, v);
  TokenId a0 = v.require("a0"), a1 = v.require("a1");

  NgramStateId begin = m.begin_state();
  auto [c_a0, s_a0] = m.score_word(begin, a0);
  CHECK(c_a0 == doctest::Approx(0.30103 * kLn10).epsilon(1e-9));
  auto [c_a1, s_a1] = m.score_word(s_a0, a1);
  CHECK(c_a1 == doctest::Approx(0.52288 * kLn10).epsilon(1e-9));
  // No <s> a1 bigram: back off through the <s> weight to the a1 unigram.
  auto [c_backoff, s2] = m.score_word(begin, a1);
  CHECK(c_backoff ==
        doctest::Approx((0.30103 + 0.60206) * kLn10).epsilon(1e-9));
  // a1 has no backoff weight: implicit zero on the way down.
  CHECK(m.end_cost(s_a1) == doctest::Approx(0.60206 * kLn10).epsilon(1e-9));
}

TEST_CASE("words without unigrams fall back to unk or fail loudly") {
  Vocabulary v = make_word_vocab(4);  // a2, a3 exist but the arpa omits them
  std::istringstream in(kTinyArpa);
  NgramModel m = NgramModel::load_arpa(in, v);
  auto [cost, state] = m.score_word(m.begin_state(), v.require("a2"));
  // <unk> unigram via the <s> backoff weight.
  CHECK(cost == doctest::Approx((0.30103 + 0.69897) * kLn10).epsilon(1e-9));

  std::string no_unk(kTinyArpa);
  no_unk.replace(no_unk.find("ngram 1=5"), 9, "ngram 1=4");
  no_unk.replace(no_unk.find("-0.69897\t<unk>\n"), 15, "");
  std::istringstream in2(no_unk);
  NgramModel m2 = NgramModel::load_arpa(in2, v);
  CHECK_THROWS_AS(m2.score_word(m2.begin_state(), v.require("a2")),
                  UnknownTokenError);
}

TEST_CASE("arpa defects: strict rejects, lenient repairs") {
  Vocabulary v = make_word_vocab(2);

  SUBCASE("declared count mismatch") {
    std::string text(kTinyArpa);
    text.replace(text.find("ngram 2=2"), 9, "ngram 2=3");
    std::istringstream lenient_in(text);
    NgramModel m = NgramModel::load_arpa(lenient_in, v);  // warns, proceeds
    CHECK(m.order() == 2);
    std::istringstream strict_in(text);
    CHECK_THROWS_AS(
        NgramModel::load_arpa(strict_in, v, NgramModel::LoadOptions{true}),
        CountMismatchError);
  }
  SUBCASE("higher-order entry with a missing prefix") {
    const char* text =
        "\\data\\\n"
        "ngram 1=4\n"
        "ngram 2=1\n"
        "ngram 3=1\n"
        "\n"
        "\\1-grams:\n"
        "-99\t<s>\t-0.30103\n"
        "-0.60206\t</s>\n"
        "-0.47712\ta0\t-0.30103\n"
        "-0.60206\ta1\n"
        "\n"
        "\\2-grams:\n"
        "-0.39794\ta0 a1\t-0.30103\n"
        "\n"
        "\\3-grams:\n"
        "-0.17609\t<s> a0 a1\n"
        "\n"
        "\\end\\\n";
    // The trigram needs a <s> a0 bigram that is not listed.  Lenient load
    // invents it at its back-off value so the trigram stays reachable.
    std::istringstream lenient_in(text);
    NgramModel m = NgramModel::load_arpa(lenient_in, v);
    TokenId a0 = v.require("a0"), a1 = v.require("a1");
    REQUIRE(m.has_entry({v.bos(), a0}));
    auto [c0, s0] = m.score_word(m.begin_state(), a0);
    CHECK(c0 == doctest::Approx((0.30103 + 0.47712) * kLn10).epsilon(1e-9));
    CHECK(s0.history == std::vector<TokenId>{v.bos(), a0});
    auto [c1, s1] = m.score_word(s0, a1);
    CHECK(c1 == doctest::Approx(0.17609 * kLn10).epsilon(1e-9));

    std::istringstream strict_in(text);
    CHECK_THROWS_AS(
        NgramModel::load_arpa(strict_in, v, NgramModel::LoadOptions{true}),
        ParseError);
  }
  SUBCASE("structural garbage") {
    std::istringstream no_data("hello\nworld\n");
    CHECK_THROWS_AS(NgramModel::load_arpa(no_data, v), ParseError);
    std::string unterminated(kTinyArpa);
    unterminated.erase(unterminated.find("\\end\\"));
    std::istringstream in2(unterminated);
    CHECK_THROWS_AS(NgramModel::load_arpa(in2, v), ParseError);
    std::istringstream in3("\\data\\\nngram 1=bogus\n");
    CHECK_THROWS_AS(NgramModel::load_arpa(in3, v), ParseError);
  }
}

TEST_CASE("arpa words must resolve against the shared vocabulary") {
  Vocabulary tiny;  // lacks a0/a1
  tiny.add("<s>");
  tiny.add("</s>");
  tiny.add("<unk>");
  std::istringstream in(kTinyArpa);
  CHECK_THROWS_AS(NgramModel::load_arpa(in, tiny), UnknownTokenError);
}

TEST_CASE("trainer rejects bad configurations") {
  Fixture fx;
  CHECK_THROWS_AS(train_addone_ngram(fx.corpus, 0, fx.vocab), ConfigError);
  Vocabulary no_specials;
  no_specials.add("a");
  CHECK_THROWS_AS(train_addone_ngram({{1}}, 2, no_specials), ConfigError);
}
