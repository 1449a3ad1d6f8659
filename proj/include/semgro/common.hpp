// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semgro
{

/// Base class for every error raised by the library.
class Error: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number when known (0 otherwise).
class ParseError: public Error
{
  public:
    ParseError(std::string const& what, std::size_t line = 0);
    [[nodiscard]] std::size_t line() const noexcept { return _line; }

  private:
    std::size_t _line;
};

class ConfigError: public Error
{
  public:
    using Error::Error;
};

// Text helpers ---------------------------------------------------------------

/// Lower-cases and collapses runs of whitespace into single spaces; trims both ends.
std::string normalize_text(std::string_view text);

/// normalize_text plus removal of trailing punctuation (". , ; :").
std::string normalize_skill_text(std::string_view text);

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::vector<std::string> tokenize(std::string_view text);
std::string join(std::vector<std::string> const& parts, std::string_view sep);
bool starts_with_ci(std::string_view text, std::string_view prefix);

/// Sorted, space-joined rendering of a name set (the retrieval object-context string).
std::string serialize_names(std::set<std::string> const& names);

// Digests --------------------------------------------------------------------

/// Lower-case hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a; used for stable bucket hashing, never for content addressing.
std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Deterministic value in [0, 1) derived from a string key.
double unit_hash(std::string_view key) noexcept;

} // namespace semgro
