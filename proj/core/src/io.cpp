#include "gmfkit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmfkit/errors.hpp"

namespace gmfkit {

namespace {

struct Field {
  std::string text;
  long column = 1;  // 1-based character offset of the field start
};

struct Line {
  std::string_view text;
  long number = 0;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  long number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back({line, ++number});
    pos = end + 1;
  }
  return out;
}

std::vector<Field> split_csv(const Line& line) {
  std::vector<Field> out;
  const std::string_view s = line.text;
  std::size_t k = 0;
  while (true) {
    Field f;
    f.column = static_cast<long>(k) + 1;
    if (k < s.size() && s[k] == '"') {
      ++k;
      bool closed = false;
      while (k < s.size()) {
        if (s[k] == '"') {
          if (k + 1 < s.size() && s[k + 1] == '"') {
            f.text += '"';
            k += 2;
            continue;
          }
          closed = true;
          ++k;
          break;
        }
        f.text += s[k++];
      }
      if (!closed) throw ParseError("unterminated quoted field", line.number, f.column);
      if (k < s.size() && s[k] != ',')
        throw ParseError("unexpected character after quoted field", line.number,
                         static_cast<long>(k) + 1);
    } else {
      const std::size_t end = std::min(s.find(',', k), s.size());
      f.text = std::string(s.substr(k, end - k));
      k = end;
    }
    out.push_back(std::move(f));
    if (k >= s.size()) break;
    ++k;  // comma
    if (k == s.size()) {
      out.push_back({std::string(), static_cast<long>(k) + 1});
      break;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing_token(std::string_view s) { return s.empty() || s == "NA" || s == "NaN"; }

double parse_number(std::string_view s, long line, long column) {
  s = trim(s);
  if (s == "Inf" || s == "inf") return HUGE_VAL;
  if (s == "-Inf" || s == "-inf") return -HUGE_VAL;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("invalid number '" + std::string(s) + "'", line, column);
  return value;
}

long parse_index(std::string_view s, long line, long column) {
  long value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("invalid index '" + std::string(s) + "'", line, column);
  return value;
}

// Whitespace-separated tokens with their 1-based columns.
std::vector<Field> split_ws(const Line& line) {
  std::vector<Field> out;
  const std::string_view s = line.text;
  std::size_t k = 0;
  while (k < s.size()) {
    while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
    if (k >= s.size()) break;
    const std::size_t start = k;
    while (k < s.size() && s[k] != ' ' && s[k] != '\t') ++k;
    out.push_back({std::string(s.substr(start, k - start)), static_cast<long>(start) + 1});
  }
  return out;
}

bool skippable(std::string_view s) {
  s = trim(s);
  return s.empty() || s.front() == '#' || s.front() == '%';
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

LabeledMatrix parse_csv(std::string_view text) {
  std::vector<Line> lines = split_lines(text);
  while (!lines.empty() && trim(lines.back().text).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty CSV input", 1, 1);

  LabeledMatrix out;
  const std::vector<Field> header = split_csv(lines.front());
  // A header holding only the corner cell is a matrix with zero columns.
  for (std::size_t k = 1; k < header.size(); ++k) out.col_names.push_back(header[k].text);
  const auto m = static_cast<Index>(out.col_names.size());
  const auto n = static_cast<Index>(lines.size() - 1);
  out.values = Matrix::Zero(n, m);
  out.mask = Mask::Constant(n, m, true);
  for (Index i = 0; i < n; ++i) {
    const Line& line = lines[static_cast<std::size_t>(i) + 1];
    const std::vector<Field> fields = split_csv(line);
    if (static_cast<Index>(fields.size()) != m + 1)
      throw ParseError("expected " + std::to_string(m + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       line.number, fields.back().column);
    out.row_names.push_back(fields[0].text);
    for (Index j = 0; j < m; ++j) {
      const Field& f = fields[static_cast<std::size_t>(j) + 1];
      const std::string_view t = trim(f.text);
      if (is_missing_token(t)) {
        out.mask(i, j) = false;
        continue;
      }
      out.values(i, j) = parse_number(t, line.number, f.column);
    }
  }
  return out;
}

LabeledMatrix read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ":" +
                         std::to_string(e.column()) + ": " + e.what(),
                     e.line(), e.column());
  }
}

std::string to_csv(const Matrix& values, const std::vector<std::string>& row_names,
                   const std::vector<std::string>& col_names, const Mask* mask) {
  if (!row_names.empty() && static_cast<Index>(row_names.size()) != values.rows())
    throw ConfigError("row name count does not match the matrix");
  if (!col_names.empty() && static_cast<Index>(col_names.size()) != values.cols())
    throw ConfigError("column name count does not match the matrix");
  if (mask && (mask->rows() != values.rows() || mask->cols() != values.cols()))
    throw ConfigError("mask shape does not match the matrix");
  std::string out = "\"\"";
  for (Index j = 0; j < values.cols(); ++j) {
    out += ',';
    out += col_names.empty() ? "c" + std::to_string(j + 1)
                             : csv_quote(col_names[static_cast<std::size_t>(j)]);
  }
  out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    out += row_names.empty() ? "r" + std::to_string(i + 1)
                             : csv_quote(row_names[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < values.cols(); ++j) {
      out += ',';
      out += (mask && !(*mask)(i, j)) ? std::string("NA") : format_double(values(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& row_names,
               const std::vector<std::string>& col_names, const Mask* mask) {
  write_text(path, to_csv(values, row_names, col_names, mask));
}

Matrix parse_matrix_market(std::string_view text) {
  const std::vector<Line> lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty MatrixMarket input", 1, 1);
  const std::vector<Field> banner = split_ws(lines.front());
  if (banner.size() != 5 || banner[0].text != "%%MatrixMarket" || banner[1].text != "matrix" ||
      banner[2].text != "coordinate")
    throw ParseError("expected '%%MatrixMarket matrix coordinate <field> general'", 1, 1);
  const std::string& field = banner[3].text;
  if (field != "real" && field != "integer" && field != "double")
    throw ParseError("unsupported field '" + field + "'", 1, banner[3].column);
  if (banner[4].text != "general")
    throw ParseError("unsupported symmetry '" + banner[4].text + "'", 1, banner[4].column);

  std::size_t k = 1;
  while (k < lines.size() && skippable(lines[k].text)) ++k;
  if (k >= lines.size()) throw ParseError("missing size line", lines.back().number, 1);
  const std::vector<Field> size = split_ws(lines[k]);
  if (size.size() != 3) throw ParseError("size line needs rows cols entries", lines[k].number, 1);
  const long n = parse_index(size[0].text, lines[k].number, size[0].column);
  const long m = parse_index(size[1].text, lines[k].number, size[1].column);
  const long nnz = parse_index(size[2].text, lines[k].number, size[2].column);
  if (n < 1 || m < 1 || nnz < 0) throw ParseError("invalid size line", lines[k].number, 1);

  Matrix out = Matrix::Zero(n, m);
  long seen = 0;
  for (++k; k < lines.size(); ++k) {
    const Line& line = lines[k];
    if (skippable(line.text)) continue;
    const std::vector<Field> f = split_ws(line);
    if (f.size() != 3) throw ParseError("entry line needs row col value", line.number, 1);
    const long i = parse_index(f[0].text, line.number, f[0].column);
    const long j = parse_index(f[1].text, line.number, f[1].column);
    if (i < 1 || i > n) throw ParseError("row index out of range", line.number, f[0].column);
    if (j < 1 || j > m) throw ParseError("column index out of range", line.number, f[1].column);
    out(i - 1, j - 1) = parse_number(f[2].text, line.number, f[2].column);
    ++seen;
  }
  if (seen != nnz)
    throw ParseError("expected " + std::to_string(nnz) + " entries, found " +
                         std::to_string(seen),
                     lines.back().number, 1);
  return out;
}

Matrix read_matrix_market(const std::filesystem::path& path) {
  try {
    return parse_matrix_market(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ":" +
                         std::to_string(e.column()) + ": " + e.what(),
                     e.line(), e.column());
  }
}

void write_matrix_market(const std::filesystem::path& path, const Matrix& values) {
  std::string body;
  long nnz = 0;
  for (Index j = 0; j < values.cols(); ++j)
    for (Index i = 0; i < values.rows(); ++i)
      if (values(i, j) != 0.0) {
        body += std::to_string(i + 1) + ' ' + std::to_string(j + 1) + ' ' +
                format_double(values(i, j)) + '\n';
        ++nnz;
      }
  write_text(path, "%%MatrixMarket matrix coordinate real general\n" +
                       std::to_string(values.rows()) + ' ' + std::to_string(values.cols()) +
                       ' ' + std::to_string(nnz) + '\n' + body);
}

Mask parse_mask(std::string_view text, Index rows, Index cols) {
  Mask mask = Mask::Constant(rows, cols, true);
  for (const Line& line : split_lines(text)) {
    if (skippable(line.text)) continue;
    const std::vector<Field> f = split_ws(line);
    if (f.size() != 2) throw ParseError("mask line needs row col", line.number, 1);
    const long i = parse_index(f[0].text, line.number, f[0].column);
    const long j = parse_index(f[1].text, line.number, f[1].column);
    if (i < 1 || i > rows) throw ParseError("row index out of range", line.number, f[0].column);
    if (j < 1 || j > cols)
      throw ParseError("column index out of range", line.number, f[1].column);
    mask(i - 1, j - 1) = false;
  }
  return mask;
}

Mask read_mask(const std::filesystem::path& path, Index rows, Index cols) {
  try {
    return parse_mask(read_text(path), rows, cols);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ":" +
                         std::to_string(e.column()) + ": " + e.what(),
                     e.line(), e.column());
  }
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::string body = "# unobserved entries, 1-based row col\n";
  for (Index j = 0; j < mask.cols(); ++j)
    for (Index i = 0; i < mask.rows(); ++i)
      if (!mask(i, j)) body += std::to_string(i + 1) + ' ' + std::to_string(j + 1) + '\n';
  write_text(path, body);
}

LabeledMatrix read_response(const std::filesystem::path& path,
                            const std::filesystem::path& mask_path) {
  LabeledMatrix out;
  if (path.extension() == ".mtx") {
    out.values = read_matrix_market(path);
    out.mask = Mask::Constant(out.values.rows(), out.values.cols(), true);
  } else {
    out = read_csv(path);
  }
  if (out.values.rows() == 0 || out.values.cols() == 0)
    throw ParseError(path.string() + ": response has no rows or no columns");
  if (!mask_path.empty()) {
    const Mask extra = read_mask(mask_path, out.values.rows(), out.values.cols());
    out.mask = out.mask && extra;
  }
  out.values = out.mask.select(out.values, Matrix::Zero(out.values.rows(), out.values.cols()));
  return out;
}

}  // namespace gmfkit
