#pragma once

// Flat key=value run configuration. '#' starts a comment; blank lines are
// ignored. Keys missing from the file take the tuned defaults of the chosen
// model kind.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "abya/training/config.hpp"

namespace abya::io {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& key, const std::string& what);

  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string source;  // file name or "command line"
  std::size_t line = 0;
};

/// Every key the parser accepts.
const std::vector<std::string>& config_keys();

std::vector<ConfigEntry> read_entries(std::istream& in, const std::string& source);
std::vector<ConfigEntry> read_entries(const std::filesystem::path& path);

/// Builds a config from entries; later entries override earlier ones.
training::TrainConfig build_config(const std::vector<ConfigEntry>& entries);

/// The config as key=value lines, accepted back by build_config.
std::string to_text(const training::TrainConfig& cfg);

}  // namespace abya::io
