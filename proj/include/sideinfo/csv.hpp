#pragma once
// CSV emission and parsing for benchmark results. Numeric fields use the
// shortest decimal representation that round-trips to the same 64-bit value,
// so output files are diffable and a read-back reproduces every bit.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace sideinfo {

inline constexpr const char* kRawCsvHeader =
    "side_info,pattern,procedure,n_train,seed,test_accuracy,main_loss,side_loss,"
    "wall_ms,failed";
inline constexpr const char* kAggCsvHeader =
    "side_info,pattern,procedure,n_train,mean_accuracy,stderr,n_seeds";

// Shortest round-trip decimal form: 0.1 -> "0.1", not "0.10000000000000001".
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("not a number: '" + s + "'");
  return v;
}

struct RawRow {
  std::string side_info;
  std::string pattern;
  std::string procedure;
  std::size_t n_train = 0;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double main_loss = 0.0;
  double side_loss = 0.0;
  double wall_ms = 0.0;
  bool failed = false;
};

struct AggRow {
  std::string side_info;
  std::string pattern;
  std::string procedure;
  std::size_t n_train = 0;
  double mean_accuracy = 0.0;
  double std_error = 0.0;
  std::size_t n_seeds = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

inline std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("not an unsigned integer: '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string raw_row_line(const RawRow& r) {
  std::ostringstream os;
  os << r.side_info << ',' << r.pattern << ',' << r.procedure << ','
     << r.n_train << ',' << r.seed << ',' << format_double(r.test_accuracy)
     << ',' << format_double(r.main_loss) << ',' << format_double(r.side_loss)
     << ',' << format_double(r.wall_ms) << ',' << (r.failed ? 1 : 0);
  return os.str();
}

inline std::string agg_row_line(const AggRow& r) {
  std::ostringstream os;
  os << r.side_info << ',' << r.pattern << ',' << r.procedure << ','
     << r.n_train << ',' << format_double(r.mean_accuracy) << ','
     << format_double(r.std_error) << ',' << r.n_seeds;
  return os.str();
}

inline void write_raw_csv(const std::string& path, const std::vector<RawRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kRawCsvHeader << '\n';
  for (const RawRow& r : rows) out << raw_row_line(r) << '\n';
}

inline void write_agg_csv(const std::string& path, const std::vector<AggRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kAggCsvHeader << '\n';
  for (const AggRow& r : rows) out << agg_row_line(r) << '\n';
}

inline std::vector<RawRow> read_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kRawCsvHeader)
    throw std::runtime_error("bad raw CSV header in " + path);
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("bad raw CSV row: " + line);
    RawRow r;
    r.side_info = f[0];
    r.pattern = f[1];
    r.procedure = f[2];
    r.n_train = detail::parse_size(f[3]);
    r.seed = detail::parse_size(f[4]);
    r.test_accuracy = parse_double(f[5]);
    r.main_loss = parse_double(f[6]);
    r.side_loss = parse_double(f[7]);
    r.wall_ms = parse_double(f[8]);
    if (f[9] != "0" && f[9] != "1") throw std::runtime_error("bad failed flag: " + f[9]);
    r.failed = f[9] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<AggRow> read_agg_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kAggCsvHeader)
    throw std::runtime_error("bad aggregate CSV header in " + path);
  std::vector<AggRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("bad aggregate CSV row: " + line);
    AggRow r;
    r.side_info = f[0];
    r.pattern = f[1];
    r.procedure = f[2];
    r.n_train = detail::parse_size(f[3]);
    r.mean_accuracy = parse_double(f[4]);
    r.std_error = parse_double(f[5]);
    r.n_seeds = detail::parse_size(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sideinfo
