#include "abya/io/transcript.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace abya::io {

std::string to_json_line(const TranscriptRecord& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["t"] = r.t;
  j["question"] = r.question;
  j["verdict"] = r.verdict;
  j["eta"] = r.eta;
  j["r_q"] = r.r_q;
  j["action"] = r.action;
  j["r_e"] = r.r_e;
  j["done"] = r.done;
  if (r.grid) j["grid"] = *r.grid;
  return j.dump();
}

TranscriptRecord from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TranscriptRecord r;
  r.episode = j.at("episode").get<std::size_t>();
  r.t = j.at("t").get<std::size_t>();
  r.question = j.at("question").get<std::string>();
  r.verdict = j.at("verdict").get<std::string>();
  r.eta = j.at("eta").get<std::array<int, 2>>();
  r.r_q = j.at("r_q").get<double>();
  r.action = j.at("action").get<int>();
  r.r_e = j.at("r_e").get<double>();
  r.done = j.at("done").get<bool>();
  if (j.contains("grid")) r.grid = j.at("grid").get<std::string>();
  return r;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
}

void TranscriptWriter::write(const TranscriptRecord& r) {
  const std::pair key{r.episode, r.t};
  if (last_ && key <= *last_) throw std::logic_error("transcript records must be in (episode, t) order");
  last_ = key;
  out_ << to_json_line(r) << '\n' << std::flush;
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

}  // namespace abya::io
