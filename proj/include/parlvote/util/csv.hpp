#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace parlvote::csv {

// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);
std::string fixed(double value, int precision);

}  // namespace parlvote::csv
