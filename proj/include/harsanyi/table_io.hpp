#pragma once

// Lattice table files.
//
// JSON:  {"n": 3, "labels": [...], "kind": "value", "entries": [{"mask": 0, "value": 1.5}, ...]}
// CSV:   "mask,value" rows, with the header object ({"n", "labels", "kind"})
//        in a sidecar file next to it: values.csv -> values.header.json.
//
// Both forms are checked for completeness (every mask in [0, 2^n) exactly
// once, finite values) on load.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "harsanyi/core.hpp"

namespace harsanyi {

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw io_error("cannot format number");
  return std::string(buf, end);
}

/// On-disk table contents before they are typed as values or interactions.
struct TableDocument {
  int n = 0;
  std::vector<std::string> labels;
  std::string kind;  // "value", "interaction", or empty when unspecified
  std::vector<double> entries;
};

enum class TableFormat { json, csv };

inline std::filesystem::path csv_sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".header.json");
  return p;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out) throw io_error("write failed for " + path.string());
}

inline void read_header(const nlohmann::json& j, TableDocument& doc,
                        const std::filesystem::path& path) {
  if (!j.is_object() || !j.contains("n") || !j["n"].is_number_integer()) {
    throw io_error(path.string() + ": header needs an integer \"n\"");
  }
  doc.n = j["n"].get<int>();
  if (doc.n < 0 || doc.n > kMaxPlayers) {
    throw io_error(path.string() + ": n=" + std::to_string(doc.n) + " out of range");
  }
  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw io_error(path.string() + ": labels must be an array");
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw io_error(path.string() + ": labels must be strings");
      doc.labels.push_back(l.get<std::string>());
    }
    if (!doc.labels.empty() && static_cast<int>(doc.labels.size()) != doc.n) {
      throw io_error(path.string() + ": " + std::to_string(doc.labels.size()) +
                     " labels for n=" + std::to_string(doc.n));
    }
  }
  if (j.contains("kind") && j["kind"].is_string()) doc.kind = j["kind"].get<std::string>();
}

// Places one (mask, value) pair, rejecting duplicates and out-of-range masks.
inline void place_entry(TableDocument& doc, std::vector<bool>& seen, long long mask,
                        double value, const std::filesystem::path& path) {
  if (mask < 0 || static_cast<unsigned long long>(mask) >= lattice_size(doc.n)) {
    throw io_error(path.string() + ": mask " + std::to_string(mask) + " out of range");
  }
  const auto i = static_cast<std::size_t>(mask);
  if (seen[i]) throw io_error(path.string() + ": duplicate mask " + std::to_string(mask));
  if (!std::isfinite(value)) {
    throw io_error(path.string() + ": non-finite value at mask " + std::to_string(mask));
  }
  seen[i] = true;
  doc.entries[i] = value;
}

inline void require_complete(const std::vector<bool>& seen,
                             const std::filesystem::path& path) {
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw io_error(path.string() + ": incomplete table, mask " + std::to_string(i) +
                     " missing");
    }
  }
}

inline nlohmann::ordered_json header_json(const TableDocument& doc) {
  nlohmann::ordered_json j;
  j["n"] = doc.n;
  j["labels"] = doc.labels;
  if (!doc.kind.empty()) j["kind"] = doc.kind;
  return j;
}

}  // namespace detail

inline TableDocument read_table_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(path.string() + ": " + e.what());
  }
  TableDocument doc;
  detail::read_header(j, doc, path);
  if (!j.contains("entries") || !j["entries"].is_array()) {
    throw io_error(path.string() + ": missing \"entries\" array");
  }
  doc.entries.assign(lattice_size(doc.n), 0.0);
  std::vector<bool> seen(doc.entries.size(), false);
  for (const auto& e : j["entries"]) {
    if (!e.is_object() || !e.contains("mask") || !e["mask"].is_number_integer() ||
        !e.contains("value") || !e["value"].is_number()) {
      throw io_error(path.string() + ": malformed entry " + e.dump());
    }
    detail::place_entry(doc, seen, e["mask"].get<long long>(), e["value"].get<double>(), path);
  }
  detail::require_complete(seen, path);
  return doc;
}

inline TableDocument read_table_csv(const std::filesystem::path& path) {
  const auto sidecar = csv_sidecar_path(path);
  TableDocument doc;
  try {
    detail::read_header(nlohmann::json::parse(detail::read_file(sidecar)), doc, sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(sidecar.string() + ": " + e.what());
  }
  doc.entries.assign(lattice_size(doc.n), 0.0);
  std::vector<bool> seen(doc.entries.size(), false);

  std::istringstream in(detail::read_file(path));
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != "mask,value") {
        throw io_error(path.string() + ": expected header \"mask,value\"");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw io_error(path.string() + ":" + std::to_string(line_no) + ": expected mask,value");
    }
    long long mask = 0;
    double value = 0.0;
    const char* b = line.data();
    auto r1 = std::from_chars(b, b + comma, mask);
    auto r2 = std::from_chars(b + comma + 1, b + line.size(), value);
    if (r1.ec != std::errc{} || r1.ptr != b + comma || r2.ec != std::errc{} ||
        r2.ptr != b + line.size()) {
      throw io_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    detail::place_entry(doc, seen, mask, value, path);
  }
  detail::require_complete(seen, path);
  return doc;
}

/// Format chosen by extension: ".csv" reads CSV + sidecar, anything else JSON.
inline TableDocument read_table(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? read_table_csv(path) : read_table_json(path);
}

inline std::string table_json_text(const TableDocument& doc) {
  // Rendered by hand so large tables stay one entry per line.
  std::string out = "{\"n\": " + std::to_string(doc.n) +
                    ", \"labels\": " + nlohmann::json(doc.labels).dump();
  if (!doc.kind.empty()) out += ", \"kind\": " + nlohmann::json(doc.kind).dump();
  out += ", \"entries\": [";
  for (std::size_t i = 0; i < doc.entries.size(); ++i) {
    out += i == 0 ? "\n" : ",\n";
    out += "  {\"mask\": " + std::to_string(i) + ", \"value\": " +
           format_double(doc.entries[i]) + "}";
  }
  out += "\n]}\n";
  return out;
}

inline void write_table(const std::filesystem::path& path, const TableDocument& doc,
                        TableFormat format = TableFormat::json) {
  if (doc.entries.size() != lattice_size(doc.n)) {
    throw io_error("refusing to write an incomplete table to " + path.string());
  }
  if (format == TableFormat::json) {
    detail::write_file(path, table_json_text(doc));
    return;
  }
  std::string out = "mask,value\n";
  for (std::size_t i = 0; i < doc.entries.size(); ++i) {
    out += std::to_string(i) + "," + format_double(doc.entries[i]) + "\n";
  }
  detail::write_file(path, out);
  detail::write_file(csv_sidecar_path(path), detail::header_json(doc).dump(2) + "\n");
}

inline TableDocument to_document(const ValueTable& t, std::vector<std::string> labels) {
  return {t.n(), std::move(labels), "value", {t.entries().begin(), t.entries().end()}};
}

inline TableDocument to_document(const InteractionTable& t, std::vector<std::string> labels) {
  return {t.n(), std::move(labels), "interaction", {t.entries().begin(), t.entries().end()}};
}

}  // namespace harsanyi
