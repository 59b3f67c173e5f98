#pragma once

// Tabular record emission (CSV with header row, or JSON array of objects,
// one record per line).

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "harsanyi/table_io.hpp"

namespace harsanyi {

using Cell = std::variant<std::int64_t, double, std::string, std::nullptr_t>;

enum class RecordFormat { csv, json };

inline const char* extension(RecordFormat f) { return f == RecordFormat::csv ? ".csv" : ".json"; }

class RecordTable {
 public:
  explicit RecordTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != columns_.size()) throw io_error("record width mismatch");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (c) out += ',';
      out += columns_[c];
    }
    out += '\n';
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        out += csv_cell(row[c]);
      }
      out += '\n';
    }
    return out;
  }

  std::string json() const {
    std::string out = "[";
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      out += r == 0 ? "\n  " : ",\n  ";
      nlohmann::ordered_json obj = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < columns_.size(); ++c) {
        std::visit([&](const auto& v) { obj[columns_[c]] = v; }, rows_[r][c]);
      }
      out += obj.dump();
    }
    out += rows_.empty() ? "]\n" : "\n]\n";
    return out;
  }

  /// Writes `<stem><ext>` into `dir`; returns the file name.
  std::string write(const std::filesystem::path& dir, const std::string& stem,
                    RecordFormat format) const {
    const std::string name = stem + extension(format);
    detail::write_file(dir / name, format == RecordFormat::csv ? csv() : json());
    return name;
  }

 private:
  static std::string csv_cell(const Cell& cell) {
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
    if (std::holds_alternative<std::nullptr_t>(cell)) return "";
    const auto& s = std::get<std::string>(cell);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char ch : s) {
      if (ch == '"') quoted += '"';
      quoted += ch;
    }
    return quoted + "\"";
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace harsanyi
