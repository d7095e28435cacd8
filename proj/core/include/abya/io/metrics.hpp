#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace abya::io {

/// Mean of the most recent `window` values (of all values until the window fills).
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window = 100);
  double push(double value);
  double value() const;
  std::size_t count() const { return values_.size(); }

 private:
  std::size_t window_;
  std::deque<double> values_;
};

struct MetricsRow {
  std::size_t episode = 0;
  double episode_return = 0.0;
  std::size_t length = 0;
  double ma100 = 0.0;
  double loss_a = 0.0;
  std::optional<double> loss_q;  // empty for models without a question policy
  double syntax_err_rate = 0.0;
};

inline constexpr const char* kMetricsHeader = "episode,return,length,ma100,loss_a,loss_q,syntax_err_rate";

/// Shortest decimal form that round-trips.
std::string format_number(double v);

std::string format_row(const MetricsRow& row);

/// Writes metrics.csv, flushing after every row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace abya::io
