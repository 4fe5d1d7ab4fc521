#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sgcrl::io {

/// Shortest decimal text that parses back to exactly `x`. NaN is "nan".
std::string format_double(double x);
/// Inverse of format_double; throws SchemaError on malformed input.
double parse_double(std::string_view text);
long parse_long(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Whole-file helpers; throw SchemaError on IO failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace sgcrl::io
