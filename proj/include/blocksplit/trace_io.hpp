#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "blocksplit/solver.hpp"

namespace blocksplit {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Parses a decimal produced by format_double (or any strtod-compatible
/// text). Throws ConfigError on malformed input.
double parse_double(const std::string& text);

inline constexpr const char* kTraceHeader = "n,residual,step,err0,errsum,block,dist_ref";

/// One row per record; absent optionals are empty cells; blocks are written
/// 1-based and joined by ';'.
void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

/// Header "n,x1,...,xd", one row per iterate.
void write_iterates_csv(std::ostream& out, std::span<const Point> iterates);
std::vector<Point> read_iterates_csv(std::istream& in);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);

} // namespace blocksplit
