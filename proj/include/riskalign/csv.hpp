#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace riskalign::csv {

// A parsed CSV file: a header row and string cells. Empty cell = missing.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a column, or -1.
    int column(std::string_view name) const;
    int require_column(std::string_view name) const;
};

Table parse(std::istream& in);
Table read_file(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);
void write_row(std::ostream& out, const std::vector<std::string>& cells);

// Shortest round-trip decimal representation.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

}  // namespace riskalign::csv
