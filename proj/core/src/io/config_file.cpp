#include "abya/io/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace abya::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const ConfigEntry& e) {
  double v = 0.0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(e.source, e.line, e.key, "expected a number, got '" + e.value + "'");
  return v;
}

std::uint64_t parse_unsigned(const ConfigEntry& e) {
  std::uint64_t v = 0;
  const char* end = e.value.data() + e.value.size();
  auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(e.source, e.line, e.key, "expected a non-negative integer, got '" + e.value + "'");
  }
  return v;
}

bool parse_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(e.source, e.line, e.key, "expected true or false, got '" + e.value + "'");
}

std::string format(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(training::TrainConfig&, const ConfigEntry&)>;

const std::map<std::string, Setter>& setters() {
  using training::TrainConfig;
  static const std::map<std::string, Setter> table = {
      {"model", [](TrainConfig&, const ConfigEntry&) {}},  // applied first, see build_config
      {"env",
       [](TrainConfig& c, const ConfigEntry& e) {
         try {
           grid::EnvConfig::from_name(e.value);
         } catch (const std::exception& ex) {
           throw ConfigError(e.source, e.line, e.key, ex.what());
         }
         c.env = e.value;
       }},
      {"oracle",
       [](TrainConfig& c, const ConfigEntry& e) {
         try {
           c.oracle = oracle::mode_from_name(e.value);
         } catch (const std::exception& ex) {
           throw ConfigError(e.source, e.line, e.key, ex.what());
         }
       }},
      {"alpha", [](TrainConfig& c, const ConfigEntry& e) { c.alpha = parse_double(e); }},
      {"eps_clip", [](TrainConfig& c, const ConfigEntry& e) { c.eps_clip = parse_double(e); }},
      {"gamma", [](TrainConfig& c, const ConfigEntry& e) { c.gamma = parse_double(e); }},
      {"lambda", [](TrainConfig& c, const ConfigEntry& e) { c.lambda = parse_double(e); }},
      {"c1", [](TrainConfig& c, const ConfigEntry& e) { c.c1 = parse_double(e); }},
      {"c2", [](TrainConfig& c, const ConfigEntry& e) { c.c2 = parse_double(e); }},
      {"c3", [](TrainConfig& c, const ConfigEntry& e) { c.c3 = parse_double(e); }},
      {"c4", [](TrainConfig& c, const ConfigEntry& e) { c.c4 = parse_double(e); }},
      {"c5", [](TrainConfig& c, const ConfigEntry& e) { c.c5 = parse_double(e); }},
      {"mi_enabled", [](TrainConfig& c, const ConfigEntry& e) { c.mi_enabled = parse_bool(e); }},
      {"mi_samples", [](TrainConfig& c, const ConfigEntry& e) { c.mi_samples = parse_unsigned(e); }},
      {"mi_weight", [](TrainConfig& c, const ConfigEntry& e) { c.mi_weight = parse_double(e); }},
      {"episodes", [](TrainConfig& c, const ConfigEntry& e) { c.episodes = parse_unsigned(e); }},
      {"seed", [](TrainConfig& c, const ConfigEntry& e) { c.seed = parse_unsigned(e); }},
      {"out_dir", [](TrainConfig& c, const ConfigEntry& e) { c.out_dir = e.value; }},
      {"update_epochs", [](TrainConfig& c, const ConfigEntry& e) { c.update_epochs = parse_unsigned(e); }},
      {"transcript_every", [](TrainConfig& c, const ConfigEntry& e) { c.transcript_every = parse_unsigned(e); }},
      {"converge_window", [](TrainConfig& c, const ConfigEntry& e) { c.converge_window = parse_unsigned(e); }},
      {"converge_delta", [](TrainConfig& c, const ConfigEntry& e) { c.converge_delta = parse_double(e); }},
      {"min_episodes", [](TrainConfig& c, const ConfigEntry& e) { c.min_episodes = parse_unsigned(e); }},
  };
  return table;
}

void validate(const training::TrainConfig& c, const std::vector<ConfigEntry>& entries) {
  auto where = [&](const std::string& key) {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
      if (it->key == key) return *it;
    return ConfigEntry{key, "", "defaults", 0};
  };
  auto require = [&](bool ok, const std::string& key, const std::string& what) {
    if (!ok) {
      const auto e = where(key);
      throw ConfigError(e.source, e.line, key, what);
    }
  };
  require(c.alpha > 0.0, "alpha", "must be > 0");
  require(c.eps_clip > 0.0 && c.eps_clip < 1.0, "eps_clip", "must lie in (0, 1)");
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma", "must lie in [0, 1]");
  require(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda", "must lie in [0, 1]");
  require(c.mi_samples >= 2, "mi_samples", "must be at least 2");
  require(c.episodes >= 1, "episodes", "must be at least 1");
  require(c.update_epochs >= 1, "update_epochs", "must be at least 1");
  require(!c.mi_enabled || agent::asks_questions(c.model), "mi_enabled", "needs a model that asks questions");
}

}  // namespace

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& key,
                         const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": key '" + key + "': " + what),
      key_(key),
      line_(line) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::vector<ConfigEntry> read_entries(std::istream& in, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, text, "expected key=value");
    ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), source, line};
    if (!setters().contains(e.key)) throw ConfigError(source, line, e.key, "unknown key");
    if (e.value.empty()) throw ConfigError(source, line, e.key, "empty value");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> read_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return read_entries(in, path.string());
}

training::TrainConfig build_config(const std::vector<ConfigEntry>& entries) {
  agent::ModelKind kind = agent::ModelKind::Main;
  for (const auto& e : entries) {
    if (!setters().contains(e.key)) throw ConfigError(e.source, e.line, e.key, "unknown key");
    if (e.key == "model") {
      try {
        kind = agent::model_from_name(e.value);
      } catch (const std::exception& ex) {
        throw ConfigError(e.source, e.line, e.key, ex.what());
      }
    }
  }
  training::TrainConfig cfg = training::TrainConfig::defaults(kind);
  for (const auto& e : entries) setters().at(e.key)(cfg, e);
  validate(cfg, entries);
  return cfg;
}

std::string to_text(const training::TrainConfig& c) {
  std::ostringstream o;
  o << "model=" << agent::model_name(c.model) << '\n'
    << "env=" << c.env << '\n'
    << "oracle=" << oracle::mode_name(c.oracle) << '\n'
    << "alpha=" << format(c.alpha) << '\n'
    << "eps_clip=" << format(c.eps_clip) << '\n'
    << "gamma=" << format(c.gamma) << '\n'
    << "lambda=" << format(c.lambda) << '\n'
    << "c1=" << format(c.c1) << '\n'
    << "c2=" << format(c.c2) << '\n'
    << "c3=" << format(c.c3) << '\n'
    << "c4=" << format(c.c4) << '\n'
    << "c5=" << format(c.c5) << '\n'
    << "mi_enabled=" << (c.mi_enabled ? "true" : "false") << '\n'
    << "mi_samples=" << c.mi_samples << '\n'
    << "mi_weight=" << format(c.mi_weight) << '\n'
    << "episodes=" << c.episodes << '\n'
    << "seed=" << c.seed << '\n'
    << "out_dir=" << c.out_dir << '\n'
    << "update_epochs=" << c.update_epochs << '\n'
    << "transcript_every=" << c.transcript_every << '\n'
    << "converge_window=" << c.converge_window << '\n'
    << "converge_delta=" << format(c.converge_delta) << '\n'
    << "min_episodes=" << c.min_episodes << '\n';
  return o.str();
}

}  // namespace abya::io
