#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ctimeta::csv {

// Minimal RFC 4180 style CSV. Fields containing separators, quotes or
// newlines are quoted; embedded quotes are doubled.

std::string escape(std::string_view field);

std::string join_row(const std::vector<std::string>& fields);

// Parses a whole document. Handles quoted fields with embedded commas,
// doubled quotes and newlines. A trailing newline does not produce an
// empty row. Lines starting with '#' outside of quotes are skipped when
// skip_comments is set (used for artifact provenance headers).
std::vector<std::vector<std::string>> parse(std::string_view text, bool skip_comments = true);

std::string format_double(double v);  // shortest representation that round-trips

double parse_double(const std::string& s);

}  // namespace ctimeta::csv
