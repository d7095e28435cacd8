#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace abya::io {

/// One step of an agent-Oracle dialogue.
struct TranscriptRecord {
  std::size_t episode = 0;
  std::size_t t = 0;
  std::string question;
  std::string verdict;
  std::array<int, 2> eta{};
  double r_q = 0.0;
  int action = 0;
  double r_e = 0.0;
  bool done = false;
  std::optional<std::string> grid;  // layout, only on the first step of an episode
};

/// Single-line JSON object.
std::string to_json_line(const TranscriptRecord& r);
TranscriptRecord from_json_line(const std::string& line);

/// Appends records to transcripts.jsonl; rejects records out of (episode, t) order.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path);
  void write(const TranscriptRecord& r);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::optional<std::pair<std::size_t, std::size_t>> last_;
};

}  // namespace abya::io
