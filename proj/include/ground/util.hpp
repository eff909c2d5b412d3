#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ground {

/// Base error for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: missing models, duplicate rules, invalid thresholds.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file that could not be parsed. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

bool valid_lat_lon(const LatLon& p) noexcept;

// ASCII-only case folding. Bytes >= 0x80 pass through untouched.
std::string casefold(std::string_view s);
bool is_ascii_upper(char c) noexcept;

struct DecodedChar {
  char32_t cp;
  std::size_t len;  // bytes consumed, >= 1
};

// Decodes one UTF-8 sequence at `pos`. Invalid bytes decode as U+FFFD with len 1.
DecodedChar decode_utf8(std::string_view s, std::size_t pos) noexcept;
std::u32string to_u32(std::string_view s);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool contains_whitespace(std::string_view s) noexcept;

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

}  // namespace ground
