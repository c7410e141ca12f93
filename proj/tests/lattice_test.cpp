#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "convlat/lattice.hpp"
#include "support/test_util.hpp"

using namespace convlat;
using namespace convlat::testing;

namespace {

// 0 -a-> 1 -b-> 3(final 0.5), 0 -c-> 2 -d-> 3, plus 1 -e-> 2.
Lattice diamond(const Vocabulary& v) {
  Lattice lat;
  lat.add_states(4);
  lat.set_start(0);
  lat.add_arc({0, 1, v.require("a0"), {1.0, 0.5}});
  lat.add_arc({0, 2, v.require("a1"), {2.0, 0.25}});
  lat.add_arc({1, 3, v.require("a2"), {0.5, 1.0}});
  lat.add_arc({2, 3, v.require("a3"), {0.25, 2.0}});
  lat.add_arc({1, 2, v.require("a4"), {0.1, 0.1}});
  lat.set_final(3, 0.5);
  return lat;
}

}  // namespace

TEST_CASE("validation reports structure and freezes the lattice") {
  Vocabulary v = make_word_vocab(8);
  Lattice lat = diamond(v);
  ValidationReport rep = lat.validate();
  CHECK(rep.acyclic);
  CHECK(rep.connected);
  CHECK(rep.epsilon_free);
  CHECK(rep.num_states == 4);
  CHECK(rep.num_arcs == 5);
  CHECK(rep.num_finals == 1);
  CHECK(lat.validated());
  CHECK_THROWS_AS(lat.add_arc({0, 1, v.require("a0"), {}}), Error);
  CHECK_THROWS_AS(lat.add_state(), Error);
}

TEST_CASE("validation rejects defective lattices") {
  Vocabulary v = make_word_vocab(4);
  TokenId a = v.require("a0");

  SUBCASE("cycle") {
    Lattice lat;
    lat.add_states(2);
    lat.set_start(0);
    lat.add_arc({0, 1, a, {}});
    lat.add_arc({1, 0, a, {}});
    lat.set_final(1, 0.0);
    CHECK_THROWS_AS(lat.validate(), CyclicLatticeError);
  }
  SUBCASE("unreachable state") {
    Lattice lat;
    lat.add_states(3);
    lat.set_start(0);
    lat.add_arc({0, 1, a, {}});
    lat.set_final(1, 0.0);
    lat.add_arc({2, 1, a, {}});
    CHECK_THROWS_AS(lat.validate(), UnreachableStateError);
  }
  SUBCASE("state that reaches no final") {
    Lattice lat;
    lat.add_states(3);
    lat.set_start(0);
    lat.add_arc({0, 1, a, {}});
    lat.add_arc({0, 2, a, {}});
    lat.set_final(1, 0.0);
    CHECK_THROWS_AS(lat.validate(), UnreachableStateError);
  }
  SUBCASE("no final state") {
    Lattice lat;
    lat.add_states(2);
    lat.set_start(0);
    lat.add_arc({0, 1, a, {}});
    CHECK_THROWS_AS(lat.validate(), NoFinalStateError);
  }
  SUBCASE("no start state") {
    Lattice lat;  // the first added state would become the start
    CHECK_THROWS_AS(lat.validate(), InvalidLatticeError);
  }
  SUBCASE("epsilon arcs need explicit permission") {
    Lattice lat;
    lat.add_states(2);
    lat.set_start(0);
    lat.add_arc({0, 1, kEpsToken, {}});
    lat.set_final(1, 0.0);
    CHECK_THROWS_AS(lat.validate(), InvalidLatticeError);
    Lattice ok;
    ok.add_states(2);
    ok.set_start(0);
    ok.add_arc({0, 1, kEpsToken, {}});
    ok.set_final(1, 0.0);
    CHECK(ok.validate(true).epsilon_free == false);
  }
}

TEST_CASE("topological order places every arc source before its target") {
  Vocabulary v = make_word_vocab(16);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Lattice lat = random_lattice(rng, v);
    const auto& topo = lat.topo_order();
    std::vector<int> pos(static_cast<size_t>(lat.num_states()), -1);
    for (size_t i = 0; i < topo.size(); ++i)
      pos[static_cast<size_t>(topo[i])] = static_cast<int>(i);
    for (const Arc& arc : lat.arcs())
      CHECK(pos[static_cast<size_t>(arc.src)] <
            pos[static_cast<size_t>(arc.dst)]);
    CHECK(topo.front() == lat.start());
  }
}

TEST_CASE("connect trims exactly the off-path states") {
  Vocabulary v = make_word_vocab(4);
  TokenId a = v.require("a0"), b = v.require("a1");
  Lattice lat;
  lat.add_states(5);
  lat.set_start(0);
  lat.add_arc({0, 1, a, {1, 1}});
  lat.set_final(1, 0.0);
  lat.add_arc({0, 2, b, {1, 1}});   // 2 is a dead end
  lat.add_arc({3, 1, a, {1, 1}});   // 3 unreachable
  lat.add_arc({0, 4, a, {2, 2}});
  lat.add_arc({4, 1, b, {3, 3}});
  Lattice trimmed = connect(lat);
  trimmed.validate();
  CHECK(trimmed.num_states() == 3);
  CHECK(trimmed.num_arcs() == 3);
  Lattice reference;
  reference.add_states(3);
  reference.set_start(0);
  reference.add_arc({0, 1, a, {1, 1}});
  reference.add_arc({0, 2, a, {2, 2}});
  reference.add_arc({2, 1, b, {3, 3}});
  reference.set_final(1, 0.0);
  reference.validate();
  CHECK(same_path_set(enumerate_paths(trimmed), enumerate_paths(reference)));
}

TEST_CASE("forward backward agrees with exhaustive path enumeration") {
  Vocabulary v = make_word_vocab(16);
  std::mt19937_64 rng(22);
  for (int t = 0; t < 30; ++t) {
    Lattice lat = random_lattice(rng, v);
    double scale = (t % 3 == 0) ? 1.0 : rand_range(rng, 0.3, 2.0);
    auto paths = enumerate_paths(lat);
    REQUIRE(!paths.empty());
    double best = kInfCost;
    for (const auto& p : paths)
      best = std::min(best, scale * p.graph + p.acoustic);

    PathCosts fb = forward_backward(lat, scale);
    CHECK(fb.total == doctest::Approx(best).epsilon(1e-12));
    CHECK(fb.beta[static_cast<size_t>(lat.start())] ==
          doctest::Approx(best).epsilon(1e-12));
    CHECK(fb.alpha[static_cast<size_t>(lat.start())] == 0.0);
    // Completing the forward costs at finals reproduces the total.
    double via_alpha = kInfCost;
    for (StateId f : lat.final_states())
      via_alpha = std::min(via_alpha, fb.alpha[static_cast<size_t>(f)] +
                                          scale * lat.final_cost(f));
    CHECK(via_alpha == doctest::Approx(best).epsilon(1e-12));
    // alpha + beta at any state never beats the total.
    for (int s = 0; s < lat.num_states(); ++s) {
      double through = fb.alpha[static_cast<size_t>(s)] +
                       fb.beta[static_cast<size_t>(s)];
      CHECK(through >= best - 1e-9);
    }
  }
}

TEST_CASE("best path is the enumeration argmin") {
  Vocabulary v = make_word_vocab(16);
  std::mt19937_64 rng(33);
  for (int t = 0; t < 30; ++t) {
    Lattice lat = random_lattice(rng, v);
    double scale = rand_range(rng, 0.5, 1.5);
    auto paths = enumerate_paths(lat);
    const PathEnum* best = &paths.front();
    auto key = [&](const PathEnum& p) { return scale * p.graph + p.acoustic; };
    for (const auto& p : paths)
      if (key(p) < key(*best)) best = &p;

    BestPath bp = best_path(lat, scale);
    CHECK(bp.cost == doctest::Approx(key(*best)).epsilon(1e-12));
    CHECK(bp.words == best->words);
    CHECK(lat.is_final(bp.end_state));
    // The reported arcs re-derive the reported cost.
    double g = 0, a = 0;
    for (int ai : bp.arc_indices) {
      g += lat.arcs()[static_cast<size_t>(ai)].cost.graph;
      a += lat.arcs()[static_cast<size_t>(ai)].cost.acoustic;
    }
    g += lat.final_cost(bp.end_state);
    CHECK(scale * g + a == doctest::Approx(bp.cost).epsilon(1e-12));
  }
}

TEST_CASE("best path ties break toward the smaller word sequence") {
  Vocabulary v = make_word_vocab(4);
  TokenId a = v.require("a0"), b = v.require("a1");
  Lattice lat;
  lat.add_states(3);
  lat.set_start(0);
  lat.add_arc({0, 2, b, {1.0, 1.0}});
  lat.add_arc({0, 1, a, {1.0, 0.5}});
  lat.add_arc({1, 2, b, {0.0, 0.5}});  // [a b] and [b] both cost 2
  lat.set_final(2, 0.0);
  lat.validate();
  BestPath bp = best_path(lat, 1.0);
  CHECK(bp.cost == doctest::Approx(2.0));
  CHECK(bp.words == std::vector<TokenId>{a, b});

  // Prefix beats its extension when costs tie.
  Lattice lat2;
  lat2.add_states(3);
  lat2.set_start(0);
  lat2.add_arc({0, 1, a, {1.0, 0.0}});
  lat2.add_arc({1, 2, b, {0.0, 0.0}});
  lat2.set_final(1, 1.0);
  lat2.set_final(2, 1.0);  // [a] and [a b] both cost 2
  lat2.validate();
  BestPath bp2 = best_path(lat2, 1.0);
  CHECK(bp2.words == std::vector<TokenId>{a});
}

TEST_CASE("count paths matches enumeration and saturates at the cap") {
  Vocabulary v = make_word_vocab(16);
  std::mt19937_64 rng(44);
  for (int t = 0; t < 20; ++t) {
    Lattice lat = random_lattice(rng, v);
    long long n = static_cast<long long>(enumerate_paths(lat).size());
    CHECK(count_paths(lat) == n);
    if (n > 1) CHECK(count_paths(lat, n - 1) == n - 1);
  }
}

TEST_CASE("text io round trips exactly and canonically") {
  Vocabulary v = make_word_vocab(16);
  std::mt19937_64 rng(55);
  for (int t = 0; t < 20; ++t) {
    Lattice lat = random_lattice(rng, v);
    std::ostringstream first;
    write_lattice_text(lat, v, first);
    std::istringstream back(first.str());
    Lattice again = read_lattice_text(back, v);
    CHECK(same_path_set(enumerate_paths(lat), enumerate_paths(again), 0.0));
    std::ostringstream second;
    write_lattice_text(again, v, second);
    CHECK(first.str() == second.str());
  }
}

TEST_CASE("reader resolves words and reports parse errors with line numbers") {
  Vocabulary v = make_word_vocab(2);

  SUBCASE("unknown word maps to unk by default") {
    std::istringstream in("0 1 mystery 1.0,2.0\n1 0.0\n");
    Lattice lat = read_lattice_text(in, v);
    CHECK(lat.arcs().at(0).word == v.unk());
  }
  SUBCASE("unknown word rejected when mapping is off") {
    std::istringstream in("0 1 mystery 1.0,2.0\n1 0.0\n");
    LatticeReadOptions opts;
    opts.map_oov_to_unk = false;
    CHECK_THROWS_AS(read_lattice_text(in, v, opts), UnknownTokenError);
  }
  SUBCASE("epsilon arcs honored only when allowed") {
    std::istringstream in("0 1 <eps> 1.0,2.0\n1 0.0\n");
    LatticeReadOptions opts;
    opts.allow_epsilon = true;
    Lattice lat = read_lattice_text(in, v, opts);
    CHECK(lat.arcs().at(0).word == kEpsToken);
  }
  SUBCASE("bad cost field carries its line number") {
    std::istringstream in("0 1 a0 1.0,2.0\n1 2 a1 oops\n2 0.0\n");
    try {
      read_lattice_text(in, v);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
    }
  }
  SUBCASE("first mentioned state is the start") {
    std::istringstream in("1 0 a0 1.0,0.0\n0 0.25\n");
    Lattice lat = read_lattice_text(in, v);
    CHECK(lat.start() == 1);
    BestPath bp = best_path(lat, 1.0);
    CHECK(bp.words == std::vector<TokenId>{v.require("a0")});
    CHECK(bp.cost == doctest::Approx(1.25));
  }
}

TEST_CASE("final states come back in ascending order") {
  Vocabulary v = make_word_vocab(4);
  Lattice lat;
  lat.add_states(4);
  lat.set_start(0);
  lat.add_arc({0, 3, v.require("a0"), {}});
  lat.add_arc({0, 1, v.require("a1"), {}});
  lat.add_arc({1, 2, v.require("a2"), {}});
  lat.set_final(3, 0.0);
  lat.set_final(1, 1.0);
  lat.set_final(2, 2.0);
  lat.validate();
  CHECK(lat.final_states() == std::vector<StateId>{1, 2, 3});
}
