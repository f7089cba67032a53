#include "letsne/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "letsne/rng.hpp"

namespace letsne {

namespace {

constexpr char kCubeMagic[9] = "HSCUBE01";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool parse_double(const std::string& token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && begin != end;
}

/// Remap raw label tokens to contiguous ids in sorted original order.
/// Numeric sort when every token parses as a number, lexical otherwise.
std::vector<int> remap_labels(const std::vector<std::string>& tokens) {
  bool all_numeric = true;
  std::vector<double> numeric(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!parse_double(tokens[i], numeric[i])) {
      all_numeric = false;
      break;
    }
  }
  std::map<std::string, int> order;
  if (all_numeric) {
    std::map<double, int> by_value;
    for (double v : numeric) by_value.emplace(v, 0);
    int next = 0;
    for (auto& [v, id] : by_value) id = next++;
    std::vector<int> out(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) out[i] = by_value.at(numeric[i]);
    return out;
  }
  for (const auto& t : tokens) order.emplace(t, 0);
  int next = 0;
  for (auto& [t, id] : order) id = next++;
  std::vector<int> out(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) out[i] = order.at(tokens[i]);
  return out;
}

void write_le64(std::ostream& os, double value) {
  const uint64_t bits = std::bit_cast<uint64_t>(value);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

void write_le32(std::ostream& os, float value) {
  const uint32_t bits = std::bit_cast<uint32_t>(value);
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

void write_le16(std::ostream& os, uint16_t value) {
  char buf[2] = {static_cast<char>(value & 0xff), static_cast<char>((value >> 8) & 0xff)};
  os.write(buf, 2);
}

double read_le64(const char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

float read_le32(const char* p) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

uint16_t read_le16(const char* p) {
  return static_cast<uint16_t>(static_cast<unsigned char>(p[0]) |
                               (static_cast<unsigned char>(p[1]) << 8));
}

}  // namespace

int DataMatrix::num_classes() const {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  return max_label + 1;
}

std::vector<int> DataMatrix::labelled_rows() const {
  std::vector<int> rows;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

DataMatrix load_tabular(const std::string& path,
                        const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const std::vector<std::string> header = split_line(line);

  Index label_index = -1;
  if (label_column) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == *label_column) label_index = static_cast<Index>(i);
    }
    if (label_index < 0) {
      throw ParseError(path + ": label column '" + *label_column + "' not in header");
    }
  }

  const Index n_cols = static_cast<Index>(header.size());
  const Index n_features = n_cols - (label_index >= 0 ? 1 : 0);
  if (n_features < 1) throw ParseError(path + ": no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> label_tokens;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    const std::vector<std::string> cells = split_line(line);
    if (static_cast<Index>(cells.size()) != n_cols) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(n_cols) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(n_features);
    for (Index c = 0; c < n_cols; ++c) {
      if (c == label_index) {
        label_tokens.push_back(cells[c]);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                         cells[c] + "' in column '" + header[c] + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ParseError(path + ": fewer than 2 samples");

  DataMatrix data;
  data.values.resize(static_cast<Index>(rows.size()), n_features);
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < n_features; ++j) data.values(i, j) = rows[i][j];
  }
  if (label_index >= 0) data.labels = remap_labels(label_tokens);
  return data;
}

DataMatrix load_cube(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open cube file: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCubeMagic, 8) != 0) {
    throw FormatError(path + ": bad magic, not an HSC cube");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) throw FormatError(path + ": missing header line");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": header is not valid JSON: " + e.what());
  }
  const long height = header.value("height", 0L);
  const long width = header.value("width", 0L);
  const long bands = header.value("bands", 0L);
  const std::string dtype = header.value("dtype", "");
  const bool has_labels = header.value("has_labels", false);
  if (height < 1 || width < 1 || bands < 1) {
    throw FormatError(path + ": all cube dimensions must be >= 1");
  }
  if (dtype != "f32" && dtype != "f64") {
    throw FormatError(path + ": dtype must be f32 or f64, got '" + dtype + "'");
  }

  const size_t n = static_cast<size_t>(height) * static_cast<size_t>(width);
  const size_t elem_size = dtype == "f32" ? 4 : 8;
  const size_t payload_bytes = n * static_cast<size_t>(bands) * elem_size;
  const size_t label_bytes = has_labels ? n * 2 : 0;

  std::vector<char> payload(payload_bytes);
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<size_t>(in.gcount()) != payload_bytes) {
    throw FormatError(path + ": payload shorter than header promises");
  }
  std::vector<char> label_block(label_bytes);
  if (has_labels) {
    in.read(label_block.data(), static_cast<std::streamsize>(label_bytes));
    if (static_cast<size_t>(in.gcount()) != label_bytes) {
      throw FormatError(path + ": label block shorter than header promises");
    }
  }
  in.peek();
  if (!in.eof()) throw FormatError(path + ": trailing bytes after payload");

  DataMatrix data;
  data.values.resize(static_cast<Index>(n), static_cast<Index>(bands));
  for (size_t pix = 0; pix < n; ++pix) {
    for (long b = 0; b < bands; ++b) {
      const size_t off = (pix * static_cast<size_t>(bands) + static_cast<size_t>(b)) * elem_size;
      data.values(static_cast<Index>(pix), b) =
          elem_size == 4 ? static_cast<double>(read_le32(payload.data() + off))
                         : read_le64(payload.data() + off);
    }
  }
  data.grid = {static_cast<int>(height), static_cast<int>(width)};

  if (has_labels) {
    std::vector<uint16_t> raw(n);
    for (size_t i = 0; i < n; ++i) raw[i] = read_le16(label_block.data() + i * 2);
    // 0 = unlabelled background; remaining ids get remapped to contiguous 0..C-1.
    std::map<uint16_t, int> remap;
    for (uint16_t r : raw) {
      if (r != 0) remap.emplace(r, 0);
    }
    int next = 0;
    for (auto& [raw_id, id] : remap) id = next++;
    data.labels.resize(n);
    for (size_t i = 0; i < n; ++i) data.labels[i] = raw[i] == 0 ? -1 : remap.at(raw[i]);
  }
  return data;
}

void save_cube(const DataMatrix& data, const std::string& path, const std::string& dtype) {
  if (!data.grid) throw UsageError("save_cube: data has no grid geometry");
  if (dtype != "f32" && dtype != "f64") throw UsageError("save_cube: dtype must be f32 or f64");
  const auto [height, width] = *data.grid;
  if (static_cast<Index>(height) * width != data.rows()) {
    throw UsageError("save_cube: grid does not match row count");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for write: " + path);
  out.write(kCubeMagic, 8);
  nlohmann::ordered_json header;
  header["height"] = height;
  header["width"] = width;
  header["bands"] = data.cols();
  header["dtype"] = dtype;
  header["has_labels"] = data.has_labels();
  out << header.dump() << '\n';

  for (Index i = 0; i < data.rows(); ++i) {
    for (Index b = 0; b < data.cols(); ++b) {
      if (dtype == "f32") {
        write_le32(out, static_cast<float>(data.values(i, b)));
      } else {
        write_le64(out, data.values(i, b));
      }
    }
  }
  if (data.has_labels()) {
    for (Index i = 0; i < data.rows(); ++i) {
      const int l = data.labels[static_cast<size_t>(i)];
      write_le16(out, l < 0 ? 0 : static_cast<uint16_t>(l + 1));
    }
  }
  if (!out) throw FormatError("write failed: " + path);
}

DataMatrix standardize(const DataMatrix& data) {
  if (data.rows() < 2) throw UsageError("standardize: need at least 2 samples");
  DataMatrix out = data;
  const Index n = data.rows();
  const Index d = data.cols();
  out.feature_means.resize(d);
  out.feature_stds.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double mean = data.values.col(j).mean();
    const double var = (data.values.col(j).array() - mean).square().sum() / static_cast<double>(n);
    double std = std::sqrt(var);
    if (std == 0.0) std = 1.0;  // constant column: keep it, all-zero after centering
    out.feature_means(j) = mean;
    out.feature_stds(j) = std;
    out.values.col(j) = (data.values.col(j).array() - mean) / std;
  }
  return out;
}

DataMatrix make_blobs(int n_per_class, int classes, int d, double spread, uint64_t seed) {
  if (n_per_class < 1 || classes < 1 || d < 1) {
    throw UsageError("make_blobs: counts and dimension must be >= 1");
  }
  if (!(spread > 0.0)) throw UsageError("make_blobs: spread must be > 0");

  Rng rng(mix_seed(seed, 0x424c4f42));  // "BLOB"
  Matrix centers(classes, d);
  for (int c = 0; c < classes; ++c) {
    for (int j = 0; j < d; ++j) centers(c, j) = rng.normal();
  }
  DataMatrix data;
  const Index n = static_cast<Index>(n_per_class) * classes;
  data.values.resize(n, d);
  data.labels.resize(static_cast<size_t>(n));
  Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (int j = 0; j < d; ++j) {
        data.values(row, j) = centers(c, j) + spread * rng.normal();
      }
      data.labels[static_cast<size_t>(row)] = c;
    }
  }
  return data;
}

DataMatrix make_swiss_roll(int n, double noise, uint64_t seed) {
  if (n < 10) throw UsageError("make_swiss_roll: need n >= 10");
  Rng rng(mix_seed(seed, 0x524f4c4c));  // "ROLL"
  DataMatrix data;
  data.values.resize(n, 3);
  data.color_proxy.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = 1.5 * M_PI * (1.0 + 2.0 * rng.uniform());
    const double height = 21.0 * rng.uniform();
    data.values(i, 0) = t * std::cos(t) + noise * rng.normal();
    data.values(i, 1) = height + noise * rng.normal();
    data.values(i, 2) = t * std::sin(t) + noise * rng.normal();
    data.color_proxy[static_cast<size_t>(i)] = t;
  }
  return data;
}

}  // namespace letsne
