// CSV and number-formatting helpers used by every on-disk format.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aisroutes::text {

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
/// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line);

/// Quotes a field when it contains a separator, quote or leading/trailing space.
std::string csv_field(std::string_view value);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_upper(std::string_view s);

/// Uppercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_destination(std::string_view s);

}  // namespace aisroutes::text
