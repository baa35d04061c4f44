#pragma once

#include <string>
#include <vector>

namespace rtls::csv {

/// RFC-4180 quoting: fields containing commas, quotes or newlines are
/// wrapped and inner quotes doubled.
std::string escape(const std::string& field);

std::string join_row(const std::vector<std::string>& fields);

/// Shortest exact decimal form of a double (round-trips bit-exactly), so
/// reruns and replays compare byte-identical.
std::string format_double(double v);

/// Parses one CSV record with RFC-4180 quoting rules.
std::vector<std::string> parse_row(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a whole CSV file; the first row is the header.
Table read_file(const std::string& path);

}  // namespace rtls::csv
