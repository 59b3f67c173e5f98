#pragma once

// Oracle served by an external host over newline-delimited JSON.
//
//   host -> client  {"protocol": 1, "n": 12, "labels": [...], "meta": {...}}
//   client -> host  {"id": 7, "keep": [0, 3, 4]}
//   host -> client  {"id": 7, "value": -1.25}
//
// Several requests may be in flight; responses are matched by id. The host
// is reached either through the stdio of a child process ("exec:<command>")
// or a TCP socket ("tcp:<host>:<port>").
//
// POSIX only.

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "harsanyi/core.hpp"
#include "harsanyi/oracle.hpp"

namespace harsanyi {

inline constexpr int kWireProtocolVersion = 1;

struct Handshake {
  int protocol = kWireProtocolVersion;
  int n = 0;
  std::vector<std::string> labels;
  nlohmann::json meta = nlohmann::json::object();
};

struct WireResponse {
  std::int64_t id = 0;
  double value = 0.0;
};

/// {"id": id, "keep": [sorted player indices]}
inline std::string encode_request(std::int64_t id, SubsetMask keep) {
  std::string out = "{\"id\":" + std::to_string(id) + ",\"keep\":[";
  bool first = true;
  for (int i = 0; i < 32; ++i) {
    if (!keep.contains(i)) continue;
    if (!first) out += ',';
    out += std::to_string(i);
    first = false;
  }
  out += "]}";
  return out;
}

inline Handshake parse_handshake(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw protocol_error(std::string{"malformed handshake: "} + e.what());
  }
  if (!j.is_object()) throw protocol_error("handshake is not an object");
  Handshake h;
  if (!j.contains("protocol") || !j["protocol"].is_number_integer()) {
    throw protocol_error("handshake lacks an integer \"protocol\"");
  }
  h.protocol = j["protocol"].get<int>();
  if (h.protocol != kWireProtocolVersion) {
    throw protocol_error("unsupported protocol version " + std::to_string(h.protocol));
  }
  if (!j.contains("n") || !j["n"].is_number_integer()) {
    throw protocol_error("handshake lacks an integer \"n\"");
  }
  h.n = j["n"].get<int>();
  if (h.n < 0 || h.n > kMaxPlayers) {
    throw protocol_error("handshake n=" + std::to_string(h.n) + " out of range");
  }
  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw protocol_error("handshake labels must be an array");
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw protocol_error("handshake labels must be strings");
      h.labels.push_back(l.get<std::string>());
    }
    if (!h.labels.empty() && static_cast<int>(h.labels.size()) != h.n) {
      throw protocol_error("handshake declares n=" + std::to_string(h.n) + " but " +
                           std::to_string(h.labels.size()) + " labels");
    }
  }
  if (j.contains("meta")) h.meta = j["meta"];
  return h;
}

/// Parses one response line. Throws protocol_error for anything that is not
/// a finite value tagged with an integer id. `id_hint` receives the id when it
/// could be recovered, so the failure can be tied to a request.
inline WireResponse parse_response(std::string_view line,
                                   std::optional<std::int64_t>* id_hint = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    // Hosts that print NaN/Infinity produce invalid JSON; salvage the id.
    if (id_hint != nullptr) {
      const auto key = line.find("\"id\"");
      if (key != std::string_view::npos) {
        auto rest = line.substr(key + 4);
        const auto digit = rest.find_first_of("-0123456789");
        if (digit != std::string_view::npos) {
          std::int64_t id = 0;
          auto [ptr, ec] = std::from_chars(rest.data() + digit, rest.data() + rest.size(), id);
          if (ec == std::errc{}) *id_hint = id;
        }
      }
    }
    throw protocol_error(std::string{"malformed response: "} + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer()) {
    throw protocol_error("malformed response: no integer id in " + std::string(line));
  }
  WireResponse r;
  r.id = j["id"].get<std::int64_t>();
  if (id_hint != nullptr) *id_hint = r.id;
  if (j.contains("error")) {
    throw protocol_error("host reported an error for id " + std::to_string(r.id) + ": " +
                         j["error"].dump());
  }
  if (!j.contains("value") || !j["value"].is_number()) {
    throw protocol_error("malformed response: no numeric value for id " +
                         std::to_string(r.id));
  }
  r.value = j["value"].get<double>();
  if (!std::isfinite(r.value)) {
    throw protocol_error("malformed response: non-finite value for id " +
                         std::to_string(r.id));
  }
  return r;
}

/// Parsed form of "exec:<command>" or "tcp:<host>:<port>".
struct Endpoint {
  enum class Kind { exec, tcp };
  Kind kind = Kind::exec;
  std::string command;
  std::string host;
  std::string port;

  static Endpoint parse(std::string_view text) {
    Endpoint e;
    if (text.starts_with("exec:")) {
      e.kind = Kind::exec;
      e.command = std::string(text.substr(5));
      if (e.command.empty()) throw domain_error("empty exec endpoint");
      return e;
    }
    if (text.starts_with("tcp:")) {
      e.kind = Kind::tcp;
      const auto rest = text.substr(4);
      const auto colon = rest.rfind(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
        throw domain_error("tcp endpoint must look like tcp:<host>:<port>");
      }
      e.host = std::string(rest.substr(0, colon));
      e.port = std::string(rest.substr(colon + 1));
      return e;
    }
    throw domain_error("unknown endpoint \"" + std::string(text) +
                       "\" (expected exec:<command> or tcp:<host>:<port>)");
  }
};

namespace detail {

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

/// Line-oriented byte stream over a pair of file descriptors.
class Connection {
 public:
  Connection(int read_fd, int write_fd, pid_t child = -1)
      : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  ~Connection() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      ::kill(child_, SIGTERM);
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t w = ::write(write_fd_, data.data(), data.size());
      if (w < 0) {
        if (errno == EINTR) continue;
        throw transport_error(std::string{"write to oracle host failed: "} +
                              std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(w));
    }
  }

  /// Next line without its terminator; throws transport_error on EOF or timeout.
  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw transport_error("timed out after " + std::to_string(timeout.count()) +
                              " ms waiting for the oracle host");
      }
      pollfd p{read_fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw transport_error(std::string{"poll failed: "} + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t r = ::read(read_fd_, chunk, sizeof chunk);
      if (r < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw transport_error(std::string{"read from oracle host failed: "} +
                              std::strerror(errno));
      }
      if (r == 0) throw transport_error("oracle host closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
};

inline std::unique_ptr<Connection> spawn_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw transport_error("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw transport_error("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw transport_error("fork failed");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
  return std::make_unique<Connection>(from_child[0], to_child[1], pid);
}

inline std::unique_ptr<Connection> connect_tcp(const std::string& host, const std::string& port,
                                               std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw transport_error("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
  std::string last_error = "no addresses";
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    const int flags = ::fcntl(fd, F_GETFL);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, a->ai_addr, a->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        if (rc == 0) errno = ETIMEDOUT;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      return std::make_unique<Connection>(fd, fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  throw transport_error("cannot connect to " + host + ":" + port + ": " + last_error);
}

}  // namespace detail

struct ExternalOptions {
  std::chrono::milliseconds timeout{10000};
  std::size_t max_in_flight = 64;
  std::optional<int> expected_n;  // handshake must agree when set
};

/// Oracle whose queries travel the wire protocol. Concurrent callers are
/// serialized on the single connection; each batch pipelines up to
/// max_in_flight requests. A failed connection is re-established (with a new
/// handshake) on the next call.
class ExternalOracle final : public Oracle {
 public:
  ExternalOracle(Endpoint endpoint, ExternalOptions options = {})
      : endpoint_(std::move(endpoint)), options_(options) {
    if (options_.max_in_flight < 1) throw domain_error("max_in_flight must be at least 1");
    detail::ignore_sigpipe();
    std::lock_guard lock(mutex_);
    connect_locked();
    handshake_ = pending_handshake_;
  }

  int size() const override { return handshake_.n; }
  std::vector<std::string> labels() const override {
    return handshake_.labels.empty() ? Oracle::labels() : handshake_.labels;
  }
  const Handshake& handshake() const { return handshake_; }

  std::size_t preferred_batch() const override { return options_.max_in_flight; }

  double query(SubsetMask keep) override {
    double out = 0.0;
    query_batch(std::span<const SubsetMask>(&keep, 1), std::span<double>(&out, 1));
    return out;
  }

  void query_batch(std::span<const SubsetMask> keep, std::span<double> out) override {
    std::lock_guard lock(mutex_);
    for (SubsetMask m : keep) check_mask(m, handshake_.n);
    std::size_t done = 0;
    try {
      if (!connection_) {
        connect_locked();
        if (pending_handshake_.n != handshake_.n) {
          throw protocol_error("host changed n from " + std::to_string(handshake_.n) +
                               " to " + std::to_string(pending_handshake_.n) +
                               " on reconnect");
        }
      }
      while (done < keep.size()) {
        const std::size_t count = std::min(options_.max_in_flight, keep.size() - done);
        exchange_locked(keep.subspan(done, count), out.subspan(done, count));
        done += count;
      }
    } catch (oracle_error& e) {
      connection_.reset();
      if (e.mask()) throw;
      const SubsetMask where = done < keep.size() ? keep[done] : keep.back();
      if (e.kind() == FailureKind::transport) throw transport_error(e.what(), where);
      throw protocol_error(e.what(), where);
    }
  }

 private:
  void connect_locked() {
    connection_.reset();
    auto conn = endpoint_.kind == Endpoint::Kind::exec
                    ? detail::spawn_process(endpoint_.command)
                    : detail::connect_tcp(endpoint_.host, endpoint_.port, options_.timeout);
    const std::string line = conn->read_line(options_.timeout);
    pending_handshake_ = parse_handshake(line);
    if (options_.expected_n && *options_.expected_n != pending_handshake_.n) {
      throw protocol_error("handshake mismatch: host declares n=" +
                           std::to_string(pending_handshake_.n) + ", expected n=" +
                           std::to_string(*options_.expected_n));
    }
    connection_ = std::move(conn);
    next_id_ = 0;
  }

  void exchange_locked(std::span<const SubsetMask> keep, std::span<double> out) {
    std::unordered_map<std::int64_t, std::size_t> pending;
    std::string payload;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const std::int64_t id = next_id_++;
      pending.emplace(id, i);
      payload += encode_request(id, keep[i]);
      payload += '\n';
    }
    connection_->write_all(payload);
    while (!pending.empty()) {
      const std::string line = connection_->read_line(options_.timeout);
      std::optional<std::int64_t> id;
      WireResponse response;
      try {
        response = parse_response(line, &id);
      } catch (const protocol_error& e) {
        if (id) {
          if (const auto it = pending.find(*id); it != pending.end()) {
            throw protocol_error(e.what(), keep[it->second]);
          }
        }
        throw;
      }
      const auto it = pending.find(response.id);
      if (it == pending.end()) {
        throw protocol_error("response for unknown or duplicate id " +
                             std::to_string(response.id));
      }
      out[it->second] = response.value;
      pending.erase(it);
    }
  }

  Endpoint endpoint_;
  ExternalOptions options_;
  std::mutex mutex_;
  std::unique_ptr<detail::Connection> connection_;
  Handshake handshake_;
  Handshake pending_handshake_;
  std::int64_t next_id_ = 0;
};

}  // namespace harsanyi
