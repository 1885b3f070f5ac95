#pragma once

#include <string>
#include <vector>

namespace admp {

// Shortest round-trip decimal form; all emitted numbers parse back exactly.
std::string format_double(double v);
double parse_double(const std::string& s);
long parse_long(const std::string& s);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace admp
