#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpx::text {

std::vector<std::string_view> split(std::string_view s, char sep);

/// Splits on runs of spaces/tabs; no empty tokens.
std::vector<std::string_view> split_ws(std::string_view s);

std::string_view trim(std::string_view s);

std::optional<std::int64_t> parse_int(std::string_view s);

/// Double-quotes `s`, escaping `"` and `\` with a backslash.
std::string quote(std::string_view s);

/// Parses a quoted token at the start of `s`. On success returns the
/// unescaped value and advances `s` past the closing quote.
std::optional<std::string> unquote_prefix(std::string_view& s);

}  // namespace mpx::text
