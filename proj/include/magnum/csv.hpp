#pragma once

#include <string>
#include <vector>

namespace magnum {

// Comma-separated rows with RFC-4180 quoting (quote-doubling, quoted fields
// may contain commas and newlines). LF and CRLF row endings both accepted.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string format_csv(const std::vector<std::vector<std::string>>& rows);

}  // namespace magnum
