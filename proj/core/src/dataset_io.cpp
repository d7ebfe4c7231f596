#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "emu/dataset.hpp"
#include "emu/errors.hpp"

namespace emu {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, const fs::path& path, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                          std::string(field) + "' as a number");
  }
  return v;
}

std::size_t parse_index(std::string_view field, const fs::path& path, std::size_t line_no) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": bad row index '" +
                          std::string(field) + "'");
  }
  return v;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in, const fs::path& path) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw InvalidArgument("'" + path.string() + "' is truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_split_file(const std::vector<Split>& split, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "row_index,split\n";
  for (std::size_t i = 0; i < split.size(); ++i) out << i << ',' << to_string(split[i]) << '\n';
  finish(out, path);
}

std::vector<Split> read_split_file(const fs::path& split_path, std::size_t rows) {
  std::vector<Split> split(rows, Split::train);
  std::vector<bool> seen(rows, false);
  std::ifstream sin = open_in(split_path);
  std::string line;
  if (!std::getline(sin, line) || trim_cr(line) != "row_index,split") {
    throw InvalidArgument(split_path.string() + ": header must be 'row_index,split'");
  }
  std::size_t line_no = 1;
  while (std::getline(sin, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() != 2) {
      throw InvalidArgument(split_path.string() + ":" + std::to_string(line_no) +
                            ": expected 2 fields");
    }
    const std::size_t idx = parse_index(fields[0], split_path, line_no);
    if (idx >= rows || seen[idx]) {
      throw InvalidArgument(split_path.string() + ":" + std::to_string(line_no) +
                            ": row index out of range or repeated");
    }
    seen[idx] = true;
    split[idx] = parse_split(fields[1]);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw InvalidArgument(split_path.string() + ": not every row has a split tag");
  }
  return split;
}

fs::path with_suffix(const fs::path& path, const char* suffix) {
  fs::path p = path;
  p.replace_extension();
  p += suffix;
  return p;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

fs::path default_split_path(const fs::path& data_path) { return with_suffix(data_path, ".split.csv"); }

bool is_pdmx_path(const fs::path& path) { return path.extension() == ".pdmx"; }

std::vector<fs::path> dataset_files(const fs::path& path) {
  if (is_pdmx_path(path)) {
    return {with_suffix(path, ".x.pdmx"), with_suffix(path, ".y.pdmx"), default_split_path(path)};
  }
  return {path, default_split_path(path)};
}

void save_dataset(const Dataset& ds, const fs::path& path) {
  if (!is_pdmx_path(path)) {
    write_dataset_csv(ds, path, default_split_path(path));
    return;
  }
  ds.validate();
  const auto files = dataset_files(path);
  write_pdmx(ds.x, files[0]);
  write_pdmx(ds.y, files[1]);
  write_split_file(ds.split, files[2]);
}

Dataset load_dataset(const fs::path& path) {
  if (!is_pdmx_path(path)) return read_dataset_csv(path, default_split_path(path));
  const auto files = dataset_files(path);
  Matrix x = read_pdmx(files[0]);
  Matrix y = read_pdmx(files[1]);
  if (x.rows() != y.rows()) {
    throw InvalidArgument(files[0].string() + " and " + files[1].string() + " differ in row count");
  }
  const std::size_t rows = x.rows();
  Dataset ds{std::move(x), std::move(y), read_split_file(files[2], rows)};
  ds.validate();
  return ds;
}

void write_dataset_csv(const Dataset& ds, const fs::path& data_path, const fs::path& split_path) {
  ds.validate();
  {
    std::ofstream out = open_out(data_path);
    std::string line;
    for (std::size_t j = 0; j < ds.x.cols(); ++j) line += (j ? ",x" : "x") + std::to_string(j);
    for (std::size_t j = 0; j < ds.y.cols(); ++j) line += ",y" + std::to_string(j);
    out << line << '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      line.clear();
      for (std::size_t j = 0; j < ds.x.cols(); ++j) {
        if (j) line += ',';
        line += format_double(ds.x(i, j));
      }
      for (std::size_t j = 0; j < ds.y.cols(); ++j) {
        line += ',';
        line += format_double(ds.y(i, j));
      }
      out << line << '\n';
    }
    finish(out, data_path);
  }
  write_split_file(ds.split, split_path);
}

Dataset read_dataset_csv(const fs::path& data_path, const fs::path& split_path) {
  std::ifstream in = open_in(data_path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("'" + data_path.string() + "' is empty");
  const auto header = split_fields(trim_cr(line));
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string_view name = header[j];
    const bool is_x = name == "x" + std::to_string(d_in) && d_out == 0;
    const bool is_y = name == "y" + std::to_string(d_out);
    if (is_x) {
      ++d_in;
    } else if (is_y) {
      ++d_out;
    } else {
      throw InvalidArgument(data_path.string() + ": unexpected header column '" +
                            std::string(name) + "'");
    }
  }
  if (d_in == 0 || d_out == 0) {
    throw InvalidArgument(data_path.string() + ": header must name x and y columns");
  }

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() != d_in + d_out) {
      throw InvalidArgument(data_path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(d_in + d_out) + " fields, got " +
                            std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d_in; ++j) xs.push_back(parse_double(fields[j], data_path, line_no));
    for (std::size_t j = 0; j < d_out; ++j) {
      ys.push_back(parse_double(fields[d_in + j], data_path, line_no));
    }
    ++rows;
  }

  Dataset ds{Matrix(rows, d_in, std::move(xs)), Matrix(rows, d_out, std::move(ys)),
             read_split_file(split_path, rows)};
  ds.validate();
  return ds;
}

Matrix read_matrix_csv(const fs::path& path, std::string_view prefix, std::size_t expected_cols) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim_cr(line).empty()) return Matrix(0, expected_cols);
  const auto header = split_fields(trim_cr(line));
  if (header.size() != expected_cols) {
    throw InvalidArgument(path.string() + ": expected " + std::to_string(expected_cols) +
                          " columns, header has " + std::to_string(header.size()));
  }
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] != std::string(prefix) + std::to_string(j)) {
      throw InvalidArgument(path.string() + ": header column " + std::to_string(j) + " must be '" +
                            std::string(prefix) + std::to_string(j) + "'");
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() != expected_cols) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_cols) + " fields, got " +
                            std::to_string(fields.size()));
    }
    for (const auto f : fields) values.push_back(parse_double(f, path, line_no));
    ++rows;
  }
  return Matrix(rows, expected_cols, std::move(values));
}

void write_matrix_csv(const Matrix& m, const fs::path& path, const std::vector<std::string>& header) {
  if (header.size() != m.cols()) throw InvalidArgument("write_matrix_csv: header width mismatch");
  std::ofstream out = open_out(path);
  std::string line;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) line += ',';
    line += header[j];
  }
  out << line << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    out << line << '\n';
  }
  finish(out, path);
}

void write_pdmx(const Matrix& m, const fs::path& path) {
  std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
  out.write("PDMX", 4);
  put_u64(out, 1);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  finish(out, path);
}

Matrix read_pdmx(const fs::path& path) {
  std::ifstream in = open_in(path, std::ios::in | std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PDMX", 4) != 0) {
    throw UnsupportedFormat("'" + path.string() + "' is not a PDMX file");
  }
  const std::uint64_t version = get_u64(in, path);
  if (version != 1) {
    throw UnsupportedFormat("'" + path.string() + "' has PDMX version " + std::to_string(version));
  }
  const std::uint64_t rows = get_u64(in, path);
  const std::uint64_t cols = get_u64(in, path);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
    throw InvalidArgument("'" + path.string() + "' declares an implausible shape");
  }
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = std::bit_cast<double>(get_u64(in, path));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InvalidArgument("'" + path.string() + "' has trailing bytes");
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace emu
