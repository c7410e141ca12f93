#include "convlat/conversation.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace convlat {

using nlohmann::json;

std::vector<Conversation> read_conversations(std::istream& in) {
  std::vector<Conversation> convs;
  std::unordered_map<std::string, size_t> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("bad conversation JSON: ") + e.what(),
                       line_no);
    }
    Utterance u;
    try {
      u.conv_id = j.at("conv_id").get<std::string>();
      u.utt_index = j.at("utt_index").get<int>();
      u.speaker = j.at("speaker").get<std::string>();
      u.ref_text = j.at("ref_text").get<std::string>();
      u.lattice_path = j.at("lattice_path").get<std::string>();
      if (j.contains("intent") && !j["intent"].is_null())
        u.intent = j["intent"].get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("conversation record: ") + e.what(),
                       line_no);
    }
    auto [it, created] = by_id.try_emplace(u.conv_id, convs.size());
    if (created) convs.push_back({u.conv_id, {}});
    convs[it->second].utterances.push_back(std::move(u));
  }
  for (auto& conv : convs)
    std::stable_sort(conv.utterances.begin(), conv.utterances.end(),
                     [](const Utterance& x, const Utterance& y) {
                       return x.utt_index < y.utt_index;
                     });
  return convs;
}

std::vector<Conversation> read_conversations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open conversation file: " + path);
  return read_conversations(in);
}

void write_conversations(const std::vector<Conversation>& convs,
                         std::ostream& out) {
  for (const auto& conv : convs) {
    for (const auto& u : conv.utterances) {
      json j{{"conv_id", u.conv_id},
             {"utt_index", u.utt_index},
             {"speaker", u.speaker},
             {"ref_text", u.ref_text},
             {"lattice_path", u.lattice_path}};
      if (!u.intent.empty()) j["intent"] = u.intent;
      out << j.dump() << "\n";
    }
  }
}

void write_conversations_file(const std::vector<Conversation>& convs,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write conversation file: " + path);
  write_conversations(convs, out);
}

void write_hyps(const std::vector<HypRecord>& hyps, std::ostream& out) {
  for (const auto& h : hyps) {
    json j{{"conv_id", h.conv_id},
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

void write_hyps_file(const std::vector<HypRecord>& hyps,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write hypothesis file: " + path);
  write_hyps(hyps, out);
}

std::vector<HypRecord> read_hyps(std::istream& in) {
  std::vector<HypRecord> hyps;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
      HypRecord h;
      h.conv_id = j.at("conv_id").get<std::string>();
      h.utt_index = j.at("utt_index").get<int>();
      h.hypothesis = j.at("hypothesis").get<std::string>();
      h.similarity = j.at("similarity").get<double>();
      h.concatenated = j.at("concatenated").get<bool>();
      const json& c = j.at("costs");
      h.graph_cost = c.at("graph").get<double>();
      h.acoustic_cost = c.at("acoustic").get<double>();
      h.total_cost = c.at("total").get<double>();
      hyps.push_back(std::move(h));
    } catch (const json::exception& e) {
      throw ParseError(std::string("hypothesis record: ") + e.what(), line_no);
    }
  }
  return hyps;
}

std::vector<HypRecord> read_hyps_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open hypothesis file: " + path);
  return read_hyps(in);
}

}  // namespace convlat
