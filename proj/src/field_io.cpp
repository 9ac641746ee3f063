#include "phaseopt/field_io.hpp"

#include "phaseopt/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace phaseopt {

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw InvalidArgument("cannot format value");
  out.append(buf, end);
}

double parse_double(std::string_view token, const std::string& origin, int line) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(origin + ":" + std::to_string(line) + ": not a number: '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

std::string format_field_csv(const Grid& grid, const Field& v) {
  require_on_grid(grid, v, "format_field_csv");
  std::string out = grid.dim() == 2 ? "x,y,value\n" : "x,value\n";
  out.reserve(out.size() + static_cast<std::size_t>(grid.cells()) * 48);
  for (int c = 0; c < grid.cells(); ++c) {
    const auto x = grid.center(c);
    append_double(out, x[0]);
    out += ',';
    if (grid.dim() == 2) {
      append_double(out, x[1]);
      out += ',';
    }
    append_double(out, v[c]);
    out += '\n';
  }
  return out;
}

std::string format_trajectory_csv(const Grid& grid, const TimeGrid& tgrid, const Trajectory& v) {
  require_on_grids(grid, tgrid, v, "format_trajectory_csv");
  std::string out = grid.dim() == 2 ? "t,x,y,value\n" : "t,x,value\n";
  for (int k = 0; k < v.levels(); ++k) {
    for (int c = 0; c < grid.cells(); ++c) {
      const auto x = grid.center(c);
      append_double(out, tgrid.time(k));
      out += ',';
      append_double(out, x[0]);
      out += ',';
      if (grid.dim() == 2) {
        append_double(out, x[1]);
        out += ',';
      }
      append_double(out, v[k][c]);
      out += '\n';
    }
  }
  return out;
}

Field parse_field_csv(const Grid& grid, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty field file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string expected = grid.dim() == 2 ? "x,y,value" : "x,value";
  if (line != expected) throw ParseError(origin + ": header must be '" + expected + "', got '" + line + "'");

  const std::size_t columns = grid.dim() == 2 ? 3 : 2;
  Field v(grid.cells());
  int row = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (row >= grid.cells()) throw ParseError(origin + ": more rows than grid cells (" + std::to_string(grid.cells()) + ")");
    std::vector<double> cols;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cols.push_back(parse_double(rest.substr(0, comma), origin, lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cols.size() != columns) throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) + " columns");
    const auto x = grid.center(row);
    for (int a = 0; a < grid.dim(); ++a) {
      if (std::abs(cols[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)]) > 1e-9 * (1.0 + grid.length(a))) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": cell coordinates do not match the grid (row " +
                         std::to_string(row) + ")");
      }
    }
    v[row] = cols.back();
    if (!std::isfinite(v[row])) throw ParseError(origin + ":" + std::to_string(lineno) + ": non-finite value");
    ++row;
  }
  if (row != grid.cells()) {
    throw ParseError(origin + ": expected " + std::to_string(grid.cells()) + " rows, found " + std::to_string(row));
  }
  return v;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out) throw InvalidArgument("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_field_csv(const std::filesystem::path& path, const Grid& grid, const Field& v) {
  write_file_atomic(path, format_field_csv(grid, v));
}

Field read_field_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read field file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_field_csv(grid, ss.str(), path.string());
}

}  // namespace phaseopt
