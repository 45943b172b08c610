#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Minimal CSV support for the pipe / inspection / table formats: comma
// separated, UTF-8, header row required, RFC-4180 style quoting accepted
// on input (no embedded newlines). Doubles are written with the shortest
// representation that round-trips.

namespace dtmc::csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line in the source file
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of a header column; -1 when absent.
    int column(std::string_view name) const;
};

Table parse(std::string_view text);

/// Read and parse a whole file; throws dtmc::IoError when unreadable.
Table read_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

/// Append one CSV line (with quoting where needed) plus '\n'.
void append_line(std::string& out, std::span<const std::string> fields);
void append_line(std::string& out, std::initializer_list<std::string> fields);

}
