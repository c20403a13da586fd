#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace saedet {

// Quotes the field when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);

// "%.9g"; enough digits to round-trip a float.
std::string format_number(double v);

// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
// Returns all records including the header. ParseError on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, const std::string& context = "<csv>");

}  // namespace saedet
