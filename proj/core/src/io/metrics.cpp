#include "abya/io/metrics.hpp"

#include <charconv>
#include <stdexcept>

namespace abya::io {

MovingAverage::MovingAverage(std::size_t window) : window_(window) {
  if (window == 0) throw std::invalid_argument("MovingAverage: window must be positive");
}

double MovingAverage::push(double value) {
  values_.push_back(value);
  if (values_.size() > window_) values_.pop_front();
  return this->value();
}

double MovingAverage::value() const {
  if (values_.empty()) return 0.0;
  double total = 0.0;
  for (double v : values_) total += v;
  return total / static_cast<double>(values_.size());
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

std::string format_row(const MetricsRow& r) {
  std::string s = std::to_string(r.episode);
  s += ',' + format_number(r.episode_return);
  s += ',' + std::to_string(r.length);
  s += ',' + format_number(r.ma100);
  s += ',' + format_number(r.loss_a);
  s += ',';
  if (r.loss_q) s += format_number(*r.loss_q);
  s += ',' + format_number(r.syntax_err_rate);
  return s;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_row(row) << '\n' << std::flush;
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

}  // namespace abya::io
