#include "braindec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "braindec/errors.hpp"

namespace braindec {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("format_double: unrepresentable value");
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);  // binary: no newline translation
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

double parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  double v{};
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": non-numeric cell '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

// Reads every data row; `header_out` receives line 1 when expect_header.
Eigen::MatrixXd read_csv_impl(const std::filesystem::path& path, bool expect_header,
                              std::vector<std::string>* header_out) {
  std::ifstream is = open_in(path);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && is.peek() == EOF) break;  // trailing newline
    if (lineno == 1 && expect_header) {
      if (header_out) *header_out = split_row(line);
      continue;
    }
    std::vector<std::string> cells = split_row(line);
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) row[c] = parse_cell(cells[c], path, lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::ofstream os = open_out(path);
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols()) {
      throw ShapeError("write_matrix_csv: header has " + std::to_string(header.size()) +
                       " names for " + std::to_string(m.cols()) + " columns");
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) os << ',';
      os << header[c];
    }
    os << '\n';
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  return read_csv_impl(path, false, nullptr);
}

void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& f) {
  std::vector<std::string> header;
  header.reserve(static_cast<std::size_t>(f.feature_count()));
  for (Eigen::Index k = 0; k < f.feature_count(); ++k) header.push_back("fn_" + std::to_string(k));
  write_matrix_csv(path, f.values, header);
}

FeatureSequence read_feature_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  FeatureSequence f;
  f.values = read_csv_impl(path, true, &header);
  if (static_cast<Eigen::Index>(header.size()) != f.values.cols()) {
    throw ParseError(path.string() + ":1: header has " + std::to_string(header.size()) +
                     " names for " + std::to_string(f.values.cols()) + " columns");
  }
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] != "fn_" + std::to_string(k)) {
      throw ParseError(path.string() + ":1: expected header cell fn_" + std::to_string(k) +
                       ", got '" + header[k] + "'");
    }
  }
  return f;
}

void write_labels_csv(const std::filesystem::path& path, const LabelTrack& labels) {
  std::ofstream os = open_out(path);
  for (int v : labels.states) os << v << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

LabelTrack read_labels_csv(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  LabelTrack out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && is.peek() == EOF) break;
    int v{};
    const char* b = line.data();
    const char* e = b + line.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": non-integer label '" + line + "'");
    }
    out.states.push_back(v);
  }
  if (out.states.empty()) throw ParseError(path.string() + ": empty label file");
  return out;
}

void write_kv_file(const std::filesystem::path& path, const KvPairs& kv) {
  std::ofstream os = open_out(path);
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

KvPairs read_kv_file(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  KvPairs kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

namespace {

template <class T>
T parse_scalar(const std::string& s, const std::string& what) {
  T v{};
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw ParseError("cannot parse " + what + " from '" + s + "'");
  }
  return v;
}

}  // namespace

double parse_double(const std::string& s, const std::string& what) {
  return parse_scalar<double>(s, what);
}

long parse_long(const std::string& s, const std::string& what) {
  return parse_scalar<long>(s, what);
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  return parse_scalar<std::uint64_t>(s, what);
}

namespace bin {

void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint8_t read_u8(std::istream& is) {
  int c = is.get();
  if (c == EOF) throw ParseError("unexpected end of binary stream");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t read_u32(std::istream& is) {
  char b[4];
  if (!is.read(b, 4)) throw ParseError("unexpected end of binary stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  char b[8];
  if (!is.read(b, 8)) throw ParseError("unexpected end of binary stream");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace bin

std::vector<std::filesystem::path> list_subdirs_sorted(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SubjectData> load_subject_dir(const std::filesystem::path& dir) {
  std::vector<SubjectData> subjects;
  int id = 0;
  for (const auto& sub : list_subdirs_sorted(dir)) {
    SubjectData s;
    s.id = id++;
    s.features = read_feature_csv(sub / "features.csv");
    s.labels = read_labels_csv(sub / "labels.csv");
    if (s.labels.size() != s.features.time_points()) {
      throw ShapeError(sub.string() + ": " + std::to_string(s.features.time_points()) +
                       " feature rows but " + std::to_string(s.labels.size()) + " labels");
    }
    subjects.push_back(std::move(s));
  }
  return subjects;
}

}  // namespace braindec
