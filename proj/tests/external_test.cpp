#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "harsanyi/external.hpp"
#include "harsanyi/table_io.hpp"

using namespace harsanyi;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

Endpoint fake_host(const std::string& args) {
  return Endpoint::parse(std::string("exec:") + FAKE_HOST_PATH + " " + args);
}

ExternalOptions quick(std::chrono::milliseconds timeout = 5000ms) {
  ExternalOptions o;
  o.timeout = timeout;
  return o;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// One-connection TCP host running in a thread; answers v(S) = |S| + 0.5.
class ScriptedTcpHost {
 public:
  explicit ScriptedTcpHost(int n) : n_(n) {
    listener_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(listener_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    ::listen(listener_, 1);
    socklen_t len = sizeof addr;
    ::getsockname(listener_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }
  ~ScriptedTcpHost() {
    thread_.join();
    ::close(listener_);
  }
  int port() const { return port_; }

 private:
  void serve() {
    const int fd = ::accept(listener_, nullptr, nullptr);
    if (fd < 0) return;
    const std::string hello = "{\"protocol\":1,\"n\":" + std::to_string(n_) + "}\n";
    detail::Connection conn(fd, fd);
    try {
      conn.write_all(hello);
      for (;;) {
        const auto req = nlohmann::json::parse(conn.read_line(5000ms));
        const double v = static_cast<double>(req["keep"].size()) + 0.5;
        conn.write_all(nlohmann::json{{"id", req["id"]}, {"value", v}}.dump() + "\n");
      }
    } catch (const transport_error&) {
      // client hung up
    }
  }

  int n_;
  int listener_ = -1;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(wire_format, encode_request) {
  EXPECT_EQ(encode_request(0, SubsetMask{0}), R"({"id":0,"keep":[]})");
  EXPECT_EQ(encode_request(7, SubsetMask{0b11001}), R"({"id":7,"keep":[0,3,4]})");
}

TEST(wire_format, parse_handshake) {
  const auto h = parse_handshake(R"({"protocol":1,"n":2,"labels":["a","b"],"meta":{"m":"x"}})");
  EXPECT_EQ(h.n, 2);
  EXPECT_EQ(h.labels, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(h.meta["m"], "x");
  EXPECT_EQ(parse_handshake(R"({"protocol":1,"n":0})").n, 0);
  for (const char* bad : {R"({"protocol":2,"n":2})", R"({"n":2})", R"({"protocol":1,"n":25})",
                          R"({"protocol":1,"n":3,"labels":["a"]})", "[1]", "garbage"}) {
    EXPECT_THROW(parse_handshake(bad), protocol_error) << bad;
  }
}

TEST(wire_format, parse_response) {
  const auto r = parse_response(R"({"id":4,"value":-1.25})");
  EXPECT_EQ(r.id, 4);
  EXPECT_EQ(r.value, -1.25);

  std::optional<std::int64_t> id;
  EXPECT_THROW(parse_response(R"({"id":9,"value":NaN})", &id), protocol_error);
  EXPECT_EQ(id, 9);
  id.reset();
  EXPECT_THROW(parse_response(R"({"id":3,"error":"boom"})", &id), protocol_error);
  EXPECT_EQ(id, 3);
  EXPECT_THROW(parse_response(R"({"value":1})"), protocol_error);
  EXPECT_THROW(parse_response(R"({"id":1,"value":"1"})"), protocol_error);
  EXPECT_THROW(parse_response(R"({"id":1})"), protocol_error);
}

TEST(wire_format, endpoints) {
  EXPECT_EQ(Endpoint::parse("exec:python host.py").command, "python host.py");
  const auto t = Endpoint::parse("tcp:localhost:9000");
  EXPECT_EQ(t.host, "localhost");
  EXPECT_EQ(t.port, "9000");
  EXPECT_THROW(Endpoint::parse("tcp:9000"), domain_error);
  EXPECT_THROW(Endpoint::parse("http://x"), domain_error);
  EXPECT_THROW(Endpoint::parse("exec:"), domain_error);
}

TEST(external_oracle, handshake_and_single_query) {
  ExternalOracle oracle(fake_host("--n 12 --seed 3"), quick());
  EXPECT_EQ(oracle.size(), 12);
  EXPECT_EQ(oracle.labels().size(), 12u);
  EXPECT_EQ(oracle.handshake().meta["host"], "fake");
  auto local = make_planted(12, 12, 3);
  EXPECT_EQ(oracle.query(SubsetMask{0}), local.query(SubsetMask{0}));
  EXPECT_EQ(oracle.query(full_mask(12)), local.query(full_mask(12)));
}

TEST(external_oracle, pipelined_batch_with_out_of_order_answers) {
  const fs::path log = fs::temp_directory_path() / ("harsanyi_wire_" + std::to_string(::getpid()));
  fs::remove(log);
  {
    ExternalOracle oracle(fake_host("--n 12 --seed 5 --reverse --log " + log.string()), quick());
    std::vector<SubsetMask> keep;
    for (std::uint32_t k = 0; k < 64; ++k) keep.push_back(SubsetMask{k});
    std::vector<double> out(64);
    oracle.query_batch(keep, out);
    auto local = make_planted(12, 12, 5);
    for (std::uint32_t k = 0; k < 64; ++k) EXPECT_EQ(out[k], local.query(SubsetMask{k})) << k;
  }
  const auto sent = lines_of(log);
  const auto golden = lines_of(fs::path(GOLDEN_DIR) / "batch64_requests.jsonl");
  EXPECT_EQ(sent, golden);
  fs::remove(log);
}

TEST(external_oracle, full_evaluation_matches_in_process_model) {
  ExternalOracle oracle(fake_host("--n 9 --seed 8 --K 6"), quick());
  auto local = make_planted(9, 6, 8);
  EXPECT_EQ(evaluate_all(oracle), evaluate_all(local));
}

TEST(external_oracle, non_finite_value_is_a_protocol_error) {
  ExternalOracle oracle(fake_host("--n 4 --nan-on 3"), quick());
  EXPECT_NO_THROW(oracle.query(SubsetMask{2}));
  try {
    oracle.query(SubsetMask{3});
    FAIL();
  } catch (const protocol_error& e) {
    EXPECT_EQ(e.mask(), SubsetMask{3});
  }
  // The connection is re-established on the next call.
  EXPECT_NO_THROW(oracle.query(SubsetMask{1}));
}

TEST(external_oracle, host_error_surfaces_through_evaluate_all) {
  ExternalOracle oracle(fake_host("--n 4 --error-on 5"), quick());
  EvaluateOptions options;
  options.initial_backoff = 1ms;
  try {
    evaluate_all(oracle, options);
    FAIL();
  } catch (const evaluation_error& e) {
    EXPECT_EQ(e.mask(), SubsetMask{5});
    EXPECT_EQ(e.kind(), FailureKind::protocol);
    EXPECT_NE(std::string(e.what()).find("scripted failure"), std::string::npos);
  }
}

TEST(external_oracle, handshake_mismatch) {
  auto options = quick();
  options.expected_n = 12;
  EXPECT_THROW(ExternalOracle(fake_host("--n 12 --declare-n 11"), options), protocol_error);
  EXPECT_THROW(ExternalOracle(Endpoint::parse("exec:echo '{\"protocol\":9,\"n\":1}'"), quick()),
               protocol_error);
}

TEST(external_oracle, silent_host_times_out) {
  ExternalOracle oracle(fake_host("--n 4 --silent-on 2"), quick(300ms));
  const auto start = std::chrono::steady_clock::now();
  try {
    oracle.query(SubsetMask{2});
    FAIL();
  } catch (const transport_error& e) {
    EXPECT_EQ(e.mask(), SubsetMask{2});
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(external_oracle, dead_or_missing_host) {
  EXPECT_THROW(ExternalOracle(Endpoint::parse("tcp:127.0.0.1:1"), quick(1000ms)), transport_error);
  EXPECT_THROW(ExternalOracle(Endpoint::parse("exec:exit 3"), quick(1000ms)), transport_error);
}

TEST(external_oracle, tcp_host) {
  ScriptedTcpHost host(5);
  {
    ExternalOracle oracle(Endpoint::parse("tcp:127.0.0.1:" + std::to_string(host.port())),
                          quick());
    EXPECT_EQ(oracle.size(), 5);
    EXPECT_EQ(oracle.labels()[4], "x5");
    const auto table = evaluate_all(oracle);
    for (std::uint32_t s = 0; s < 32; ++s) {
      EXPECT_EQ(table[SubsetMask{s}], SubsetMask{s}.size() + 0.5);
    }
  }
}

TEST(external_oracle, serves_a_table_file) {
  const fs::path p = fs::temp_directory_path() / ("harsanyi_host_" + std::to_string(::getpid()) + ".json");
  write_table(p, to_document(ValueTable(2, {0.0, 1.0, 2.0, 5.0}), {"a", "b"}));
  ExternalOracle oracle(fake_host("--table " + p.string()), quick());
  EXPECT_EQ(oracle.labels(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(evaluate_all(oracle), ValueTable(2, {0.0, 1.0, 2.0, 5.0}));
  fs::remove(p);
}
