#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "convlat/lattice.hpp"

namespace convlat {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream iss(line);
  std::string f;
  while (iss >> f) fields.push_back(f);
  return fields;
}

long parse_state(const std::string& s, int line_no) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || v < 0)
    throw ParseError("bad state id '" + s + "'", line_no);
  return v;
}

double parse_cost(const std::string& s, int line_no) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError("bad cost '" + s + "'", line_no);
  return v;
}

// Shortest decimal form that round-trips through strtod.
std::string format_cost(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Lattice read_lattice_text(std::istream& in, const Vocabulary& vocab,
                          const LatticeReadOptions& opts) {
  struct RawArc {
    StateId src, dst;
    TokenId word;
    Cost cost;
  };
  std::vector<RawArc> raw_arcs;
  std::vector<std::pair<StateId, double>> raw_finals;
  StateId start = -1;
  StateId max_state = -1;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() == 2) {
      StateId s = static_cast<StateId>(parse_state(fields[0], line_no));
      double cost = parse_cost(fields[1], line_no);
      raw_finals.emplace_back(s, cost);
      if (start < 0) start = s;
      max_state = std::max(max_state, s);
    } else if (fields.size() == 4) {
      StateId src = static_cast<StateId>(parse_state(fields[0], line_no));
      StateId dst = static_cast<StateId>(parse_state(fields[1], line_no));
      TokenId word = vocab.find(fields[2]);
      if (word == kNoToken) {
        if (opts.map_oov_to_unk && vocab.unk() != kNoToken)
          word = vocab.unk();
        else
          throw UnknownTokenError("unknown word '" + fields[2] + "' at line " +
                                  std::to_string(line_no));
      }
      if (word == kEpsToken && !opts.allow_epsilon)
        throw ParseError("epsilon arc label not allowed here", line_no);
      auto comma = fields[3].find(',');
      if (comma == std::string::npos)
        throw ParseError("cost must be <graph>,<acoustic>", line_no);
      Cost cost{parse_cost(fields[3].substr(0, comma), line_no),
                parse_cost(fields[3].substr(comma + 1), line_no)};
      raw_arcs.push_back({src, dst, word, cost});
      if (start < 0) start = src;
      max_state = std::max({max_state, src, dst});
    } else {
      throw ParseError("expected 2 or 4 fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
  }
  if (start < 0) throw ParseError("no start state in lattice input");

  Lattice lattice;
  lattice.add_states(max_state + 1);
  lattice.set_start(start);
  for (const RawArc& a : raw_arcs) lattice.add_arc({a.src, a.dst, a.word, a.cost});
  for (const auto& [s, c] : raw_finals) lattice.set_final(s, c);
  lattice.validate(opts.allow_epsilon);
  return lattice;
}

void write_lattice_text(const Lattice& lattice, const Vocabulary& vocab,
                        std::ostream& out) {
  if (!lattice.validated())
    throw InvalidLatticeError("cannot write unvalidated lattice");
  // Position of each state in topological order; start always comes first.
  std::vector<int> pos(static_cast<size_t>(lattice.num_states()), 0);
  {
    int i = 0;
    for (StateId s : lattice.topo_order()) pos[static_cast<size_t>(s)] = i++;
  }
  std::vector<int> order(static_cast<size_t>(lattice.num_arcs()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    const Arc& a = lattice.arcs()[static_cast<size_t>(x)];
    const Arc& b = lattice.arcs()[static_cast<size_t>(y)];
    auto ka = std::tuple(pos[static_cast<size_t>(a.src)], a.dst, a.word,
                         a.cost.graph, a.cost.acoustic);
    auto kb = std::tuple(pos[static_cast<size_t>(b.src)], b.dst, b.word,
                         b.cost.graph, b.cost.acoustic);
    return ka < kb;
  });
  for (int ai : order) {
    const Arc& a = lattice.arcs()[static_cast<size_t>(ai)];
    out << a.src << ' ' << a.dst << ' ' << vocab.token(a.word) << ' '
        << format_cost(a.cost.graph) << ',' << format_cost(a.cost.acoustic)
        << '\n';
  }
  for (StateId s : lattice.final_states())
    out << s << ' ' << format_cost(lattice.final_cost(s)) << '\n';
}

Lattice read_lattice_file(const std::string& path, const Vocabulary& vocab,
                          const LatticeReadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open lattice file: " + path);
  return read_lattice_text(in, vocab, opts);
}

void write_lattice_file(const Lattice& lattice, const Vocabulary& vocab,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for write: " + path);
  write_lattice_text(lattice, vocab, out);
}

}  // namespace convlat
