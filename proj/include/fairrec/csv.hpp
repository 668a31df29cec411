#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fairrec::csv {

// Deterministic double formatting: identical values give identical bytes and
// round-trip through strtod.
std::string format_double(double v);

double parse_double(const std::string& field);
long long parse_int(const std::string& field);

void write_row(std::ostream& os, std::initializer_list<std::string_view> fields);

std::vector<std::string> split_line(const std::string& line, char delim = ',');

// Whole-file reader; returns all rows (including the header) split on commas.
std::vector<std::vector<std::string>> read_file(const std::string& path);

}  // namespace fairrec::csv
