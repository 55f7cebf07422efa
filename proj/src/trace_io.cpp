#include "blocksplit/trace_io.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "blocksplit/errors.hpp"

namespace blocksplit {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError("not a number: '" + text + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r') cells.back().pop_back();
  return cells;
}

namespace {

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::optional<double> read_optional(const std::string& cell) {
  if (cell.empty() || cell == "\r") return std::nullopt;
  return parse_double(cell);
}

std::size_t parse_index(const std::string& text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("not an index: '" + text + "'");
  return v;
}

} // namespace

void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.n << ',' << optional_cell(r.residual) << ',' << optional_cell(r.step) << ','
        << format_double(r.err0) << ',' << format_double(r.errsum) << ',';
    for (std::size_t k = 0; k < r.block.size(); ++k) out << (k ? ";" : "") << r.block[k] + 1;
    out << ',' << optional_cell(r.dist_ref) << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ConfigError("trace CSV has an unexpected header: " + line);
  std::vector<TraceRecord> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw ConfigError("trace CSV line " + std::to_string(lineno) + ": expected 7 cells");
    TraceRecord r;
    r.n = parse_index(cells[0]);
    r.residual = read_optional(cells[1]);
    r.step = read_optional(cells[2]);
    r.err0 = parse_double(cells[3]);
    r.errsum = parse_double(cells[4]);
    std::istringstream blocks(cells[5]);
    std::string idx;
    while (std::getline(blocks, idx, ';')) {
      const std::size_t i = parse_index(idx);
      if (i == 0) throw ConfigError("trace CSV block indices are 1-based");
      r.block.push_back(i - 1);
    }
    r.dist_ref = read_optional(cells[6]);
    trace.push_back(std::move(r));
  }
  return trace;
}

void write_iterates_csv(std::ostream& out, std::span<const Point> iterates) {
  const Eigen::Index d = iterates.empty() ? 0 : iterates.front().size();
  out << 'n';
  for (Eigen::Index k = 0; k < d; ++k) out << ",x" << k + 1;
  out << '\n';
  for (std::size_t n = 0; n < iterates.size(); ++n) {
    out << n;
    for (Eigen::Index k = 0; k < iterates[n].size(); ++k) out << ',' << format_double(iterates[n][k]);
    out << '\n';
  }
}

std::vector<Point> read_iterates_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("iterates CSV is empty");
  const std::size_t d = split_csv_line(line).size() - 1;
  std::vector<Point> iterates;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + 1) throw ConfigError("iterates CSV: ragged row");
    if (parse_index(cells[0]) != iterates.size()) throw ConfigError("iterates CSV: rows out of order");
    Point x(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) x[static_cast<Eigen::Index>(k)] = parse_double(cells[k + 1]);
    iterates.push_back(std::move(x));
  }
  return iterates;
}

} // namespace blocksplit
