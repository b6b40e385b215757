#include "ddcbf/harness/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "ddcbf/errors.hpp"

namespace ddcbf::harness {

namespace {

constexpr int kFixedColumns = 6;

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(),
                    [](double x, double y) { return same_bits(x, y); });
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

double parse_field(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw IoError(where + ": malformed number '" + s + "'");
  return v;
}

/// Opens `path` for appending after truncating it to `length` bytes.
std::ofstream open_truncated(const std::string& path, std::int64_t length) {
  if (!std::filesystem::exists(path))
    throw IoError("cannot resume: " + path + " is missing");
  const auto have = static_cast<std::int64_t>(std::filesystem::file_size(path));
  if (have < length)
    throw IoError("cannot resume: " + path + " is shorter than the checkpoint records");
  std::filesystem::resize_file(path, static_cast<std::uintmax_t>(length));
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open " + path);
  return out;
}

}  // namespace

bool MetricRow::operator==(const MetricRow& o) const {
  return slot == o.slot && scheme == o.scheme && same_bits(sum_rate, o.sum_rate) &&
         same_bits(moving_avg, o.moving_avg) && same_bits(sigma_a, o.sigma_a) &&
         same_bits(decision_us, o.decision_us) && same_bits(cell_rates, o.cell_rates) &&
         same_bits(rewards, o.rewards);
}

std::string metrics_header(int num_cells) {
  std::string h = "slot,scheme,sum_rate,moving_avg,sigma_a,decision_us";
  for (int n = 0; n < num_cells; ++n) h += ",rate_" + std::to_string(n);
  for (int n = 0; n < num_cells; ++n) h += ",reward_" + std::to_string(n);
  return h;
}

std::string format_row(const MetricRow& row) {
  std::string out = std::to_string(row.slot) + "," + row.scheme;
  for (double v : {row.sum_rate, row.moving_avg, row.sigma_a, row.decision_us}) {
    out += ',';
    append_double(out, v);
  }
  for (double v : row.cell_rates) {
    out += ',';
    append_double(out, v);
  }
  for (double v : row.rewards) {
    out += ',';
    append_double(out, v);
  }
  return out;
}

MetricWriter::MetricWriter(const std::string& path, int num_cells, std::int64_t append_at)
    : path_(path), num_cells_(num_cells) {
  if (append_at >= 0) {
    out_ = open_truncated(path, append_at);
    size_ = append_at;
    return;
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create " + path);
  pending_ = std::string(kMetricsVersionLine) + "\n" + metrics_header(num_cells) + "\n";
  flush();
}

void MetricWriter::add(const MetricRow& row) {
  if (static_cast<int>(row.cell_rates.size()) != num_cells_ ||
      static_cast<int>(row.rewards.size()) != num_cells_)
    throw DimensionError("metric row has the wrong number of cells");
  pending_ += format_row(row);
  pending_ += '\n';
}

void MetricWriter::flush() {
  if (pending_.empty()) return;
  out_.write(pending_.data(), static_cast<std::streamsize>(pending_.size()));
  out_.flush();
  if (!out_) throw IoError("write to " + path_ + " failed");
  size_ += static_cast<std::int64_t>(pending_.size());
  pending_.clear();
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsVersionLine)
    throw IoError(path + ": missing '" + std::string(kMetricsVersionLine) + "' line");
  if (!std::getline(in, line)) throw IoError(path + ": missing header row");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if ((columns - kFixedColumns) % 2 != 0 || columns < kFixedColumns + 2)
    throw IoError(path + ": malformed header row");
  const int cells = static_cast<int>((columns - kFixedColumns) / 2);
  if (line != metrics_header(cells)) throw IoError(path + ": unexpected header row");

  std::vector<MetricRow> rows;
  for (int number = 3; std::getline(in, line); ++number) {
    const std::string where = path + ":" + std::to_string(number);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (static_cast<long>(fields.size()) != columns)
      throw IoError(where + ": expected " + std::to_string(columns) + " fields");
    MetricRow row;
    char* end = nullptr;
    row.slot = std::strtoll(fields[0].c_str(), &end, 10);
    if (fields[0].empty() || *end != '\0') throw IoError(where + ": malformed slot");
    row.scheme = fields[1];
    row.sum_rate = parse_field(fields[2], where);
    row.moving_avg = parse_field(fields[3], where);
    row.sigma_a = parse_field(fields[4], where);
    row.decision_us = parse_field(fields[5], where);
    for (int n = 0; n < cells; ++n)
      row.cell_rates.push_back(parse_field(fields[kFixedColumns + n], where));
    for (int n = 0; n < cells; ++n)
      row.rewards.push_back(parse_field(fields[kFixedColumns + cells + n], where));
    rows.push_back(std::move(row));
  }
  return rows;
}

EventLog::EventLog(const std::string& path, std::int64_t append_at) {
  if (append_at >= 0) {
    out_ = open_truncated(path, append_at);
    size_ = append_at;
    return;
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create " + path);
}

void EventLog::write(const std::string& json_object) {
  out_ << json_object << '\n';
  out_.flush();
  if (!out_) throw IoError("event log write failed");
  size_ += static_cast<std::int64_t>(json_object.size()) + 1;
}

double MovingAverage::push(double value) {
  values_.push_back(value);
  if (static_cast<int>(values_.size()) > window_) values_.pop_front();
  return this->value();
}

double MovingAverage::value() const {
  if (values_.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

void MovingAverage::save(io::ByteWriter& out) const {
  out.u32(static_cast<std::uint32_t>(window_));
  out.u64(values_.size());
  for (double v : values_) out.f64(v);
}

void MovingAverage::load(io::ByteReader& in) {
  const int window = static_cast<int>(in.u32());
  const auto count = in.u64();
  if (count > static_cast<std::uint64_t>(window) || count > in.remaining() / 8)
    throw IoError("corrupt moving-average state");
  window_ = window;
  values_.clear();
  for (std::uint64_t i = 0; i < count; ++i) values_.push_back(in.f64());
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(samples.size());
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.emplace_back(samples[i], static_cast<double>(i + 1) / n);
  return out;
}

}  // namespace ddcbf::harness
