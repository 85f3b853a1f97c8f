#include "mobsim/core/csv.hpp"

namespace mobsim::csv {

namespace {

const std::string kEmpty;

std::vector<std::vector<std::string>> parse_records(const std::string& content) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      records.push_back(std::move(record));
    }
    record.clear();
  };

  size_t i = 0;
  // UTF-8 BOM
  if (content.size() >= 3 && static_cast<unsigned char>(content[0]) == 0xEF &&
      static_cast<unsigned char>(content[1]) == 0xBB &&
      static_cast<unsigned char>(content[2]) == 0xBF) {
    i = 3;
  }
  for (; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;  // stray quote mid-field, keep verbatim
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (!field.empty() || !record.empty()) {
    end_record();
  }
  return records;
}

}  // namespace

Table::Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows)
    : header_{std::move(header)}, rows_{std::move(rows)} {
  for (size_t i = 0; i < header_.size(); ++i) {
    columns_.emplace(header_[i], i);
  }
}

const std::string& Table::get(size_t r, const std::string& column) const {
  auto it = columns_.find(column);
  if (it == columns_.end() || r >= rows_.size() || it->second >= rows_[r].size()) {
    return kEmpty;
  }
  return rows_[r][it->second];
}

Table parse(const std::string& content) {
  auto records = parse_records(content);
  if (records.empty()) {
    return Table{{}, {}};
  }
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  return Table{std::move(header), std::move(records)};
}

std::string quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace mobsim::csv
