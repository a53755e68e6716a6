#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace webagents {

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

std::vector<std::string> split_lines(std::string_view text);

// First sentence of `text`, terminated by '.', '!' or '?' (terminator kept).
// Falls back to the first non-empty line when no terminator is present.
std::string first_sentence(std::string_view text);

// Collapses internal newlines and caps the result at `max_chars` characters,
// appending an ellipsis when truncated.
std::string single_line(std::string_view s, std::size_t max_chars);

std::size_t levenshtein(std::string_view a, std::string_view b);

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

// Whitespace-delimited token count (the scripted backend's declared
// approximation of model tokens).
std::size_t whitespace_tokens(std::string_view text);

// Lowercases scheme and host, strips a trailing slash. Idempotent.
std::string normalize_url(std::string_view url);

} // namespace webagents
