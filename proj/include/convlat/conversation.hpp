#ifndef CONVLAT_CONVERSATION_HPP
#define CONVLAT_CONVERSATION_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "convlat/errors.hpp"

namespace convlat {

struct Utterance {
  std::string conv_id;
  int utt_index = 0;
  std::string speaker;
  std::string intent;  // empty when the input carries no intent label
  std::string ref_text;
  std::string lattice_path;
};

struct Conversation {
  std::string conv_id;
  std::vector<Utterance> utterances;  // sorted by utt_index
};

/// JSON Lines, one utterance per line:
///   {conv_id, utt_index, speaker, intent?, ref_text, lattice_path}
/// Conversations come back in first-appearance order, utterances sorted by
/// utt_index within each.
std::vector<Conversation> read_conversations(std::istream& in);
std::vector<Conversation> read_conversations_file(const std::string& path);

void write_conversations(const std::vector<Conversation>& convs,
                         std::ostream& out);
void write_conversations_file(const std::vector<Conversation>& convs,
                              const std::string& path);

/// One rescored hypothesis, mirrored to the output JSONL:
///   {conv_id, utt_index, hypothesis, similarity, concatenated, costs}
struct HypRecord {
  std::string conv_id;
  int utt_index = 0;
  std::string hypothesis;
  double similarity = 0.0;
  bool concatenated = false;
  double graph_cost = 0.0;
  double acoustic_cost = 0.0;
  double total_cost = 0.0;
};

void write_hyps(const std::vector<HypRecord>& hyps, std::ostream& out);
void write_hyps_file(const std::vector<HypRecord>& hyps,
                     const std::string& path);
std::vector<HypRecord> read_hyps(std::istream& in);
std::vector<HypRecord> read_hyps_file(const std::string& path);

}  // namespace convlat

#endif  // CONVLAT_CONVERSATION_HPP
