#include "ivsmm/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "ivsmm/errors.hpp"

namespace ivsmm {

namespace {

// One CSV record; handles quoted fields, escaped quotes and CRLF endings.
// Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 std::size_t& line_no) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  ++line_no;
  while (true) {
    if (c == EOF) {
      fields.push_back(field);
      return true;
    }
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        const int peek = in.peek();
        if (peek == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(field);
      return true;
    } else {
      field.push_back(ch);
    }
    c = in.get();
  }
}

double parse_number(const std::string& text, const std::string& column,
                    std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE ||
      !std::isfinite(v)) {
    throw CsvParseError("line " + std::to_string(line) + ", column '" +
                            column + "': cannot parse '" + text +
                            "' as a number",
                        line);
  }
  return v;
}

}  // namespace

Dataset ingest_csv(const std::string& path, const std::string& outcome,
                   const std::string& exposure,
                   const std::string& instrument) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file '" + path + "'");

  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!read_record(in, fields, line_no)) {
    throw Error("file '" + path + "' is empty; a header row is required");
  }
  int iy = -1, ix = -1, iz = -1;
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (fields[j] == outcome) iy = static_cast<int>(j);
    if (fields[j] == exposure) ix = static_cast<int>(j);
    if (fields[j] == instrument) iz = static_cast<int>(j);
  }
  if (iy < 0) throw ColumnNotFoundError("column '" + outcome + "' not found");
  if (ix < 0) throw ColumnNotFoundError("column '" + exposure + "' not found");
  if (iz < 0) {
    throw ColumnNotFoundError("column '" + instrument + "' not found");
  }

  std::vector<double> ys, xs;
  std::vector<long long> zs;
  std::size_t dropped = 0;
  while (read_record(in, fields, line_no)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    const std::size_t needed = static_cast<std::size_t>(
        std::max({iy, ix, iz})) + 1;
    if (fields.size() < needed) {
      throw CsvParseError(
          "line " + std::to_string(line_no) + ": expected at least " +
              std::to_string(needed) + " fields, found " +
              std::to_string(fields.size()),
          line_no);
    }
    const std::string& fy = fields[static_cast<std::size_t>(iy)];
    const std::string& fx = fields[static_cast<std::size_t>(ix)];
    const std::string& fz = fields[static_cast<std::size_t>(iz)];
    if (fy.empty() || fx.empty() || fz.empty()) {
      ++dropped;
      continue;
    }
    const double vy = parse_number(fy, outcome, line_no);
    const double vx = parse_number(fx, exposure, line_no);
    const double vz = parse_number(fz, instrument, line_no);
    if (std::abs(vz - std::llround(vz)) > 1e-9) {
      throw CsvParseError("line " + std::to_string(line_no) +
                              ": instrument value '" + fz +
                              "' is not an integer",
                          line_no);
    }
    ys.push_back(vy);
    xs.push_back(vx);
    zs.push_back(std::llround(vz));
  }
  if (ys.empty()) throw Error("file '" + path + "' has no usable rows");

  const Index n = static_cast<Index>(ys.size());
  Vector y(n), x(n);
  IntVector z(n);
  // Relabel instrument values to 0..K-1 in ascending numeric order.
  std::vector<long long> distinct = zs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.size() < 2) {
    throw DegenerateInstrumentError(
        "instrument column has fewer than 2 distinct levels");
  }
  std::vector<double> level_values(distinct.begin(), distinct.end());
  for (Index i = 0; i < n; ++i) {
    y[i] = ys[static_cast<std::size_t>(i)];
    x[i] = xs[static_cast<std::size_t>(i)];
    z[i] = static_cast<int>(
        std::lower_bound(distinct.begin(), distinct.end(),
                         zs[static_cast<std::size_t>(i)]) -
        distinct.begin());
  }
  return make_dataset(std::move(y), std::move(x), std::move(z),
                      std::move(level_values), dropped);
}

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& outcome, const std::string& exposure,
               const std::string& instrument) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file '" + path + "' for writing");
  out << outcome << ',' << exposure << ',' << instrument << '\n';
  char buf[64];
  for (Index i = 0; i < ds.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", ds.x[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g",
                  ds.level_values[static_cast<std::size_t>(ds.z[i])]);
    out << buf << '\n';
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace ivsmm
