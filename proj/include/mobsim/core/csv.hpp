#pragma once

#include <map>
#include <string>
#include <vector>

namespace mobsim::csv {

// One parsed CSV table: header names plus row access by column name.
class Table {
 public:
  Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows);

  size_t row_count() const { return rows_.size(); }
  bool has_column(const std::string& name) const { return columns_.count(name) > 0; }

  // Value of `column` in row `r`; empty string when the column is absent
  // or the row is short.
  const std::string& get(size_t r, const std::string& column) const;

  const std::vector<std::string>& header() const { return header_; }

 private:
  std::vector<std::string> header_;
  std::map<std::string, size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// RFC-4180-ish parser: quoted fields, embedded quotes doubled, CRLF tolerated,
// UTF-8 BOM stripped. Blank lines are skipped.
Table parse(const std::string& content);

// Quote `field` for CSV output if it contains commas, quotes or newlines.
std::string quote(const std::string& field);

}  // namespace mobsim::csv
