#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tsd::csv {

/// Quotes a field only when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream & out, const std::vector<std::string> & fields);

/// Reads one logical record (RFC 4180 quoting). Returns false at end of input.
bool read_row(std::istream & in, std::vector<std::string> & fields);

/// Shortest round-trip decimal form.
std::string format_double(double value);

double parse_double(std::string_view text);

}  // namespace tsd::csv
