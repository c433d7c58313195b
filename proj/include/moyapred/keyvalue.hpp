#pragma once
// Line-oriented `key = value` documents used for schemas, cohort specs and
// run configs. Grammar:
//
//   document := line*
//   line     := blank | comment | entry
//   comment  := optional spaces, '#', anything
//   entry    := key spaces? '=' spaces? value
//
// Keys are trimmed and may repeat; entries keep file order. Values are
// trimmed, and a '#' inside a value starts a trailing comment.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace moyapred {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyValueEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

class KeyValueDocument {
 public:
  KeyValueDocument() = default;

  static KeyValueDocument parse(std::string_view text);
  static KeyValueDocument read_file(const std::string& path);

  const std::vector<KeyValueEntry>& entries() const { return entries_; }

  // Last value for the key, if any.
  std::optional<std::string> get(std::string_view key) const;
  std::vector<const KeyValueEntry*> all(std::string_view key) const;
  bool contains(std::string_view key) const { return get(key).has_value(); }

  void add(std::string key, std::string value);
  // Replaces every existing entry of the key with one entry at the end.
  void set(std::string key, std::string value);

  std::string to_string() const;

 private:
  std::vector<KeyValueEntry> entries_;
};

// Small string helpers shared by the text formats.
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delimiter);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Strict numeric parsing: the whole (trimmed) string must be consumed.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

double require_double(std::string_view s, std::string_view what);
long long require_int(std::string_view s, std::string_view what);
bool require_bool(std::string_view s, std::string_view what);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace moyapred
