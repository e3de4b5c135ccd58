#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace countycast::csv {

// Splits one delimited line. Fields may be wrapped in double quotes; "" inside
// a quoted field is an escaped quote. No multi-line fields.
std::vector<std::string> split_line(std::string_view line, char delim);

// Reads all lines of a delimited file. Throws InputError when the file cannot
// be opened. Empty trailing lines are dropped.
std::vector<std::vector<std::string>> read_table(const std::string& path, char delim);

std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Index of `name` in `header`, or -1.
int column_index(const std::vector<std::string>& header, std::string_view name);

} // namespace countycast::csv
