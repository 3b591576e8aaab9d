#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace p808::csv {

// RFC 4180 table: first row is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Parses UTF-8 CSV text (comma separated, double-quote escaping, CRLF or LF).
// Throws ParseError on an unterminated quote or an empty input.
Table parse(std::string_view text);

// Writes the table with LF line endings. `quote_all` quotes every field;
// otherwise only fields that need it.
std::string write(const Table& table, bool quote_all = false);

std::string escape(std::string_view field, bool force_quotes = false);

// Splits a ';'-joined list cell; an empty cell yields an empty list.
std::vector<std::string> split_list(std::string_view cell, char sep = ';');
std::string join_list(const std::vector<std::string>& items, char sep = ';');

}  // namespace p808::csv
