#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include "ddcbf/util/binary_io.hpp"

namespace ddcbf::harness {

/// One scheme's outcome in one slot.
struct MetricRow {
  std::int64_t slot = 0;
  std::string scheme;
  double sum_rate = 0.0;
  double moving_avg = 0.0;
  double sigma_a = 0.0;      // exploration noise after the slot; 0 for non-DRL
  double decision_us = 0.0;  // mean per-BS decision time, 0 unless recorded
  std::vector<double> cell_rates;
  std::vector<double> rewards;  // NaN for schemes without a reward

  bool operator==(const MetricRow&) const;
};

/// First line of every metric file.
inline constexpr const char* kMetricsVersionLine = "# ddcbf-metrics v1";

std::string metrics_header(int num_cells);
/// Doubles are written with %.17g so that reading them back is lossless.
std::string format_row(const MetricRow& row);

/// Append-only CSV writer. Rows are buffered and written with one flush per
/// slot batch.
class MetricWriter {
 public:
  /// Creates the file (header included) or, with `append_at` >= 0, truncates
  /// an existing file to that many bytes and appends.
  MetricWriter(const std::string& path, int num_cells, std::int64_t append_at = -1);

  void add(const MetricRow& row);
  void flush();
  /// Bytes committed to disk so far.
  std::int64_t size() const { return size_; }

 private:
  std::string path_;
  int num_cells_;
  std::ofstream out_;
  std::string pending_;
  std::int64_t size_ = 0;
};

std::vector<MetricRow> read_metrics(const std::string& path);

/// JSON-lines log for checkpoints, warnings and failures.
class EventLog {
 public:
  EventLog(const std::string& path, std::int64_t append_at = -1);

  /// `json_object` is one serialized JSON object without a trailing newline.
  void write(const std::string& json_object);
  std::int64_t size() const { return size_; }

 private:
  std::ofstream out_;
  std::int64_t size_ = 0;
};

/// Mean of the last `window` values pushed.
class MovingAverage {
 public:
  explicit MovingAverage(int window = 200) : window_(window) {}

  double push(double value);
  double value() const;
  std::size_t count() const { return values_.size(); }

  void save(io::ByteWriter& out) const;
  void load(io::ByteReader& in);

 private:
  int window_;
  std::deque<double> values_;
};

/// Sorted samples with empirical CDF levels i/n, i = 1..n.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples);

}  // namespace ddcbf::harness
