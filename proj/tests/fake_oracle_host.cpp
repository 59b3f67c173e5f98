// Scripted oracle host for wire-protocol tests. Serves a planted model (or a
// table file) on stdin/stdout and can misbehave on request.
//
//   --n N --seed S --K K     planted model served (defaults: 12, 0, n)
//   --table PATH             serve a value table instead
//   --reverse                answer each burst of requests in reverse order
//   --nan-on MASK            print a NaN literal for this mask
//   --error-on MASK          answer with an error record for this mask
//   --silent-on MASK         never answer this mask
//   --declare-n N            lie about n in the handshake
//   --log PATH               append every request line received

#include <poll.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "harsanyi/oracle.hpp"
#include "harsanyi/table_io.hpp"

namespace {

// Raw line reader on stdin so pending input is visible to poll().
class LineReader {
 public:
  // Next complete line, or nullopt once stdin is closed.
  std::optional<std::string> next() {
    for (;;) {
      if (auto line = buffered()) return line;
      if (!fill()) return std::nullopt;
    }
  }

  std::optional<std::string> buffered() {
    const auto nl = buffer_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = buffer_.substr(0, nl);
    buffer_.erase(0, nl + 1);
    return line;
  }

  bool pending(int timeout_ms) {
    if (buffer_.find('\n') != std::string::npos) return true;
    pollfd p{STDIN_FILENO, POLLIN, 0};
    return ::poll(&p, 1, timeout_ms) > 0;
  }

 private:
  bool fill() {
    char chunk[4096];
    const ssize_t r = ::read(STDIN_FILENO, chunk, sizeof chunk);
    if (r <= 0) return false;
    buffer_.append(chunk, static_cast<std::size_t>(r));
    return true;
  }

  std::string buffer_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scripted oracle host"};
  int n = 12;
  std::uint64_t seed = 0;
  std::optional<std::size_t> k;
  std::string table;
  bool reverse = false;
  std::optional<std::uint32_t> nan_on;
  std::optional<std::uint32_t> error_on;
  std::optional<std::uint32_t> silent_on;
  std::optional<int> declare_n;
  std::string log_path;
  app.add_option("--n", n);
  app.add_option("--seed", seed);
  app.add_option("--K", k);
  app.add_option("--table", table);
  app.add_flag("--reverse", reverse);
  app.add_option("--nan-on", nan_on);
  app.add_option("--error-on", error_on);
  app.add_option("--silent-on", silent_on);
  app.add_option("--declare-n", declare_n);
  app.add_option("--log", log_path);
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<harsanyi::Oracle> oracle;
  if (!table.empty()) {
    auto doc = harsanyi::read_table(table);
    n = doc.n;
    oracle = std::make_unique<harsanyi::TableOracle>(
        harsanyi::ValueTable{doc.n, std::move(doc.entries)}, doc.labels);
  } else {
    oracle = std::make_unique<harsanyi::PlantedModel>(
        harsanyi::make_planted(n, k.value_or(static_cast<std::size_t>(n)), seed));
  }

  std::ofstream log;
  if (!log_path.empty()) log.open(log_path, std::ios::app);

  nlohmann::json hello = {{"protocol", 1},
                          {"n", declare_n.value_or(n)},
                          {"labels", oracle->labels()},
                          {"meta", {{"host", "fake"}}}};
  if (declare_n) hello["labels"] = nlohmann::json::array();
  std::cout << hello.dump() << "\n" << std::flush;

  auto answer = [&](const std::string& line) -> std::optional<std::string> {
    const auto req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.contains("id") || !req.contains("keep")) {
      return R"({"id":-1,"error":"malformed request"})";
    }
    const auto id = req["id"].get<long long>();
    std::uint32_t mask = 0;
    for (const auto& i : req["keep"]) {
      const int idx = i.get<int>();
      if (idx < 0 || idx >= n) {
        return nlohmann::json{{"id", id}, {"error", "keep index out of range"}}.dump();
      }
      mask |= 1u << idx;
    }
    if (silent_on && mask == *silent_on) return std::nullopt;
    if (nan_on && mask == *nan_on) return "{\"id\":" + std::to_string(id) + ",\"value\":NaN}";
    if (error_on && mask == *error_on) {
      return nlohmann::json{{"id", id}, {"error", "scripted failure"}}.dump();
    }
    const double v = oracle->query(harsanyi::SubsetMask{mask});
    return "{\"id\":" + std::to_string(id) + ",\"value\":" + harsanyi::format_double(v) + "}";
  };

  LineReader reader;
  std::vector<std::string> burst;
  while (auto next = reader.next()) {
    const std::string& line = *next;
    if (line.empty()) continue;
    if (log) log << line << "\n" << std::flush;
    if (!reverse) {
      if (auto a = answer(line)) std::cout << *a << "\n" << std::flush;
      continue;
    }
    burst.push_back(line);
    if (reader.pending(50)) continue;
    for (auto it = burst.rbegin(); it != burst.rend(); ++it) {
      if (auto a = answer(*it)) std::cout << *a << "\n";
    }
    std::cout << std::flush;
    burst.clear();
  }
}
