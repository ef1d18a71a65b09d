#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hzsl::text {

// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view token);
std::optional<std::int64_t> parse_int(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char sep);
// Splits on runs of spaces/tabs, dropping empty fields.
std::vector<std::string_view> split_ws(std::string_view line);

std::string_view trim(std::string_view s);

// Writes "# format: <name> v1".
void write_format_line(std::ostream& out, std::string_view name);
// True if `line` is a "# format: <name> v<k>" line; throws kParse when it
// names a different format.
bool check_format_line(std::string_view line, std::string_view name,
                       const std::string& where);

std::string where(const std::string& path, std::size_t line_no);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace hzsl::text
