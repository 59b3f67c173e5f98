#pragma once

// Command implementations behind the `harsanyi` executable. Each run writes
// its artifacts plus a manifest into one output directory.
//
// Oracle sources:
//   planted:K=<k>[,sigma=<s>][,background=<c>][,background_max=<b>]
//           [,min=<lo>][,max=<hi>][,sign=mixed|positive|negative]
//                      synthetic model; n from --n, seed from --seed
//   table:<path>       value table file (.json, or .csv with sidecar header)
//   exec:<command>     external host on a child process's stdio
//   tcp:<host>:<port>  external host over TCP
//
// Exit codes: 0 success, 1 analysis failure, 2 I/O or transport,
// 3 configuration.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "harsanyi/analysis.hpp"
#include "harsanyi/core.hpp"
#include "harsanyi/external.hpp"
#include "harsanyi/oracle.hpp"
#include "harsanyi/records.hpp"
#include "harsanyi/table_io.hpp"
#include "harsanyi/transform.hpp"
#include "harsanyi/version.hpp"

namespace harsanyi::cli {

enum ExitCode : int {
  kSuccess = 0,
  kAnalysisFailure = 1,
  kIoFailure = 2,
  kConfigFailure = 3,
};

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Check failed (e.g. verify deviation above tolerance).
class analysis_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kVerifyTolerance = 1e-9;
inline constexpr std::size_t kDefaultSampleBudget = 65536;

inline std::vector<std::size_t> default_salient_counts() { return {50, 100, 150, 200}; }
inline std::vector<std::size_t> default_transfer_counts() { return {5, 10, 15, 20, 25, 30}; }

struct SourceConfig {
  std::string oracle;
  std::optional<int> n;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::string command;
  SourceConfig source;
  std::vector<std::size_t> salient_counts;  // empty: command default
  std::size_t half_window = kDefaultHalfWindow;
  std::optional<std::size_t> sample;  // nullopt: automatic ("all" when n <= 20)
  bool sample_all = false;
  std::filesystem::path out;
  bool force = false;
  int parallelism = 1;
  int timeout_ms = 10000;
  std::size_t max_in_flight = 64;
  int retries = 3;
  RecordFormat format = RecordFormat::csv;
  double report_floor = 1e-9;

  // verify
  bool reference = true;
  std::optional<std::filesystem::path> interactions_file;

  // transfer
  SourceConfig source_b;
  std::optional<std::filesystem::path> mapping_file;

  // attribute
  std::string target;
};

/// A resolved oracle plus whatever the source knows about itself.
struct Source {
  std::unique_ptr<Oracle> oracle;
  std::vector<std::string> labels;
  std::optional<InteractionTable> ground_truth;
  nlohmann::ordered_json description;
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw config_error("planted option " + key + ": not a number: " + text);
  }
  return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw config_error("planted option " + key + ": not a count: " + text);
  }
  return v;
}

inline PlantedConfig parse_planted(const std::string& options, const SourceConfig& source) {
  if (!source.n) throw config_error("planted oracle needs --n");
  PlantedConfig pc;
  pc.n = *source.n;
  pc.seed = source.seed;
  bool have_k = false;
  std::stringstream ss(options);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw config_error("planted option without '=': " + item);
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "K") {
      pc.salient_count = parse_count(key, value);
      have_k = true;
    } else if (key == "sigma") {
      pc.sigma = parse_number(key, value);
    } else if (key == "background") {
      pc.background_count = parse_count(key, value);
    } else if (key == "background_max") {
      pc.background_ceiling = parse_number(key, value);
    } else if (key == "min") {
      pc.effect_floor = parse_number(key, value);
    } else if (key == "max") {
      pc.effect_ceiling = parse_number(key, value);
    } else if (key == "sign") {
      if (value == "mixed") pc.sign = SignPolicy::mixed;
      else if (value == "positive") pc.sign = SignPolicy::positive;
      else if (value == "negative") pc.sign = SignPolicy::negative;
      else throw config_error("planted sign must be mixed, positive or negative");
    } else {
      throw config_error("unknown planted option: " + key);
    }
  }
  if (!have_k) throw config_error("planted oracle needs K=<count>");
  return pc;
}

inline const char* sign_name(SignPolicy s) {
  switch (s) {
    case SignPolicy::positive: return "positive";
    case SignPolicy::negative: return "negative";
    default: return "mixed";
  }
}

}  // namespace detail

inline Source open_source(const SourceConfig& config, const RunConfig& run) {
  const std::string& text = config.oracle;
  Source src;
  if (text.starts_with("planted:")) {
    const auto pc = detail::parse_planted(text.substr(8), config);
    auto model = std::make_unique<PlantedModel>(pc);
    src.ground_truth = model->ground_truth();
    src.labels = model->labels();
    src.description = {{"kind", "planted"},
                       {"n", pc.n},
                       {"K", pc.salient_count},
                       {"seed", pc.seed},
                       {"sigma", pc.sigma},
                       {"effect_min", pc.effect_floor},
                       {"effect_max", pc.effect_ceiling},
                       {"sign", detail::sign_name(pc.sign)},
                       {"background", pc.background_count},
                       {"background_max", pc.background_ceiling}};
    src.oracle = std::move(model);
    return src;
  }
  if (text.starts_with("table:")) {
    const std::filesystem::path path = text.substr(6);
    auto doc = read_table(path);
    if (config.n && *config.n != doc.n) {
      throw config_error("--n " + std::to_string(*config.n) + " disagrees with table n=" +
                         std::to_string(doc.n));
    }
    src.labels = doc.labels.empty() && doc.n > 0 ? PlayerSet::numbered(doc.n).labels()
                                                 : doc.labels;
    src.description = {{"kind", "table"}, {"path", path.string()}, {"n", doc.n}};
    src.oracle = std::make_unique<TableOracle>(ValueTable{doc.n, std::move(doc.entries)},
                                               src.labels);
    return src;
  }
  if (text.starts_with("exec:") || text.starts_with("tcp:")) {
    Endpoint endpoint;
    try {
      endpoint = Endpoint::parse(text);
    } catch (const domain_error& e) {
      throw config_error(e.what());
    }
    ExternalOptions options;
    options.timeout = std::chrono::milliseconds(run.timeout_ms);
    options.max_in_flight = run.max_in_flight;
    options.expected_n = config.n;
    auto oracle = std::make_unique<ExternalOracle>(endpoint, options);
    src.labels = oracle->labels();
    src.description = {{"kind", "external"},
                       {"endpoint", text},
                       {"n", oracle->size()},
                       {"meta", oracle->handshake().meta}};
    src.oracle = std::move(oracle);
    return src;
  }
  throw config_error("unknown oracle source \"" + text +
                     "\" (expected planted:, table:, exec: or tcp:)");
}

/// Output directory written under "<out>.partial" and renamed on success.
/// A failed run leaves the partial directory with an INCOMPLETE marker.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path out, bool force) : out_(std::move(out)) {
    namespace fs = std::filesystem;
    if (out_.empty()) throw config_error("--out is required");
    if (fs::exists(out_) && !force) {
      throw config_error("output directory " + out_.string() +
                         " already exists (use --force to replace it)");
    }
    staging_ = out_;
    staging_ += ".partial";
    std::error_code ec;
    fs::remove_all(staging_, ec);
    fs::create_directories(staging_, ec);
    if (ec) throw io_error("cannot create " + staging_.string() + ": " + ec.message());
    harsanyi::detail::write_file(staging_ / "INCOMPLETE", "run did not finish\n");
  }

  const std::filesystem::path& path() const { return staging_; }

  void commit() {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::remove(staging_ / "INCOMPLETE", ec);
    fs::remove_all(out_, ec);
    fs::rename(staging_, out_, ec);
    if (ec) throw io_error("cannot finalize " + out_.string() + ": " + ec.message());
  }

 private:
  std::filesystem::path out_;
  std::filesystem::path staging_;
};

namespace detail {

inline nlohmann::ordered_json echo_source(const SourceConfig& s) {
  nlohmann::ordered_json j;
  j["oracle"] = s.oracle;
  j["n"] = s.n ? nlohmann::ordered_json(*s.n) : nlohmann::ordered_json(nullptr);
  j["seed"] = s.seed;
  return j;
}

inline nlohmann::ordered_json echo_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = c.command;
  j["source"] = echo_source(c.source);
  j["M"] = c.salient_counts;
  j["window_t"] = c.half_window;
  j["sample"] = c.sample_all ? nlohmann::ordered_json("all")
                : c.sample  ? nlohmann::ordered_json(*c.sample)
                            : nlohmann::ordered_json("auto");
  j["parallelism"] = c.parallelism;
  j["timeout_ms"] = c.timeout_ms;
  j["max_in_flight"] = c.max_in_flight;
  j["retries"] = c.retries;
  j["format"] = c.format == RecordFormat::csv ? "csv" : "json";
  j["report_floor"] = c.report_floor;
  if (c.command == "verify") {
    j["reference"] = c.reference;
    j["interactions"] = c.interactions_file ? c.interactions_file->string() : "";
  }
  if (c.command == "transfer") {
    j["source_b"] = echo_source(c.source_b);
    j["mapping"] = c.mapping_file ? c.mapping_file->string() : "";
  }
  if (c.command == "attribute") j["target"] = c.target;
  return j;
}

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& config,
                           nlohmann::ordered_json extra, const std::vector<std::string>& files) {
  nlohmann::ordered_json m;
  m["tool"] = "harsanyi";
  m["version"] = kVersion;
  m["seed"] = config.source.seed;
  m["config"] = echo_config(config);
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["outputs"] = files;
  harsanyi::detail::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

/// Requested counts clamped to the lattice size, deduplicated, order kept.
inline std::vector<std::size_t> effective_counts(const std::vector<std::size_t>& requested,
                                                 std::size_t lattice) {
  std::vector<std::size_t> out;
  for (std::size_t m : requested) {
    if (m == 0) throw config_error("--M values must be at least 1");
    const std::size_t e = std::min(m, lattice);
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  return out;
}

inline std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

/// Two-column "Concept S | Inference effect I(S|x)" layout.
inline std::string concept_table(const std::vector<std::pair<std::string, double>>& rows) {
  std::size_t width = std::string("Concept S").size();
  for (const auto& r : rows) width = std::max(width, r.first.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  std::string out = pad("Concept S") + "Inference effect I(S|x)\n";
  out += std::string(width + 2 + 23, '-') + "\n";
  for (const auto& [label, effect] : rows) out += pad(label) + fixed(effect) + "\n";
  return out;
}

inline ValueTable evaluate(Source& src, const RunConfig& config) {
  EvaluateOptions options;
  options.parallelism = config.parallelism;
  options.max_retries = config.retries;
  return evaluate_all(*src.oracle, options);
}

inline void save_table(const std::filesystem::path& dir, const std::string& stem,
                       const TableDocument& doc, RecordFormat format,
                       std::vector<std::string>& files) {
  const std::string name = stem + extension(format);
  write_table(dir / name, doc, format == RecordFormat::csv ? TableFormat::csv : TableFormat::json);
  files.push_back(name);
  if (format == RecordFormat::csv) files.push_back(csv_sidecar_path(name).string());
}

inline std::vector<std::pair<int, int>> read_mapping(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(harsanyi::detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw io_error(path.string() + ": mapping must be an array");
  std::vector<std::pair<int, int>> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("a") || !e.contains("b") ||
        !e["a"].is_number_integer() || !e["b"].is_number_integer()) {
      throw io_error(path.string() + ": mapping entries must be {\"a\": int, \"b\": int}");
    }
    out.emplace_back(e["a"].get<int>(), e["b"].get<int>());
  }
  return out;
}

}  // namespace detail

inline int run_extract(const RunConfig& config, std::ostream& out) {
  auto src = open_source(config.source, config);
  RunDirectory dir(config.out, config.force);
  const auto values = detail::evaluate(src, config);
  const auto interactions = mobius_inverse(values, config.parallelism);
  const PlayerSet players(src.labels);

  std::vector<std::string> files;
  detail::save_table(dir.path(), "values", to_document(values, src.labels), config.format, files);
  detail::save_table(dir.path(), "interactions", to_document(interactions, src.labels),
                     config.format, files);

  const auto counts = detail::effective_counts(
      config.salient_counts.empty() ? default_salient_counts() : config.salient_counts,
      interactions.size());
  for (std::size_t m : counts) {
    const auto salient = extract_salient(interactions, m);
    RecordTable records({"rank", "mask", "concept", "effect"});
    std::vector<std::pair<std::string, double>> shown;
    std::int64_t rank = 0;
    for (const auto& e : salient) {
      records.add({++rank, static_cast<std::int64_t>(e.mask.bits), players.render(e.mask),
                   e.effect});
      if (std::abs(e.effect) > config.report_floor) shown.emplace_back(players.render(e.mask), e.effect);
    }
    const std::string stem = "salient_M" + std::to_string(m);
    files.push_back(records.write(dir.path(), stem, config.format));

    std::string report = "Top " + std::to_string(m) + " interactions (n=" +
                         std::to_string(values.n()) + ", v(x)=" +
                         detail::fixed(values[full_mask(values.n())]) + ", v(empty)=" +
                         detail::fixed(values[SubsetMask{0}]) + "); " +
                         std::to_string(shown.size()) + " concepts with |I| > " +
                         format_double(config.report_floor) + "\n\n" +
                         detail::concept_table(shown);
    const std::string report_name = "report_M" + std::to_string(m) + ".txt";
    harsanyi::detail::write_file(dir.path() / report_name, report);
    files.push_back(report_name);
    out << report << "\n";
  }

  detail::write_manifest(dir.path(), config,
                         {{"source", src.description}, {"effective_M", counts}}, files);
  dir.commit();
  return kSuccess;
}

/// Largest |a - b| / max(1, |b|) over a table pair, with the first mask whose
/// deviation exceeds `tolerance`.
struct Deviation {
  double max_deviation = 0.0;
  SubsetMask worst;
  std::optional<SubsetMask> first_offending;
};

inline Deviation compare_tables(std::span<const double> got, std::span<const double> want,
                                bool relative, double tolerance) {
  Deviation d;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double scale = relative ? std::max(1.0, std::abs(want[i])) : 1.0;
    const double dev = std::abs(got[i] - want[i]) / scale;
    if (dev > d.max_deviation) {
      d.max_deviation = dev;
      d.worst = SubsetMask{static_cast<std::uint32_t>(i)};
    }
    if (dev > tolerance && !d.first_offending) {
      d.first_offending = SubsetMask{static_cast<std::uint32_t>(i)};
    }
  }
  return d;
}

inline int run_verify(const RunConfig& config, std::ostream& out) {
  auto src = open_source(config.source, config);
  const int n = src.oracle->size();
  if (config.reference && n > kReferenceMaxPlayers) {
    throw config_error("reference comparison refused for n=" + std::to_string(n) +
                       " (limit " + std::to_string(kReferenceMaxPlayers) +
                       "); pass --no-reference");
  }
  RunDirectory dir(config.out, config.force);
  const auto values = detail::evaluate(src, config);
  const auto interactions = mobius_inverse(values, config.parallelism);

  RecordTable checks({"check", "max_deviation", "worst_mask", "tolerance", "status",
                      "offending_mask"});
  bool pass = true;
  std::optional<SubsetMask> offending;
  auto record = [&](const std::string& name, const Deviation& d) {
    const bool ok = !d.first_offending;
    pass = pass && ok;
    if (!ok && !offending) offending = d.first_offending;
    checks.add({name, d.max_deviation, static_cast<std::int64_t>(d.worst.bits),
                kVerifyTolerance, std::string(ok ? "pass" : "fail"),
                ok ? Cell{nullptr} : Cell{static_cast<std::int64_t>(d.first_offending->bits)}});
    out << (ok ? "PASS " : "FAIL ") << name << ": max deviation "
        << format_double(d.max_deviation);
    if (!ok) out << " (first offending mask " << d.first_offending->bits << ")";
    out << "\n";
  };

  record("zeta_roundtrip",
         compare_tables(zeta_transform(interactions).entries(), values.entries(), true,
                        kVerifyTolerance));
  if (config.reference) {
    record("mobius_reference", compare_tables(interactions.entries(),
                                              mobius_inverse_reference(values).entries(),
                                              false, kVerifyTolerance));
  }
  if (config.interactions_file) {
    auto doc = read_table(*config.interactions_file);
    if (doc.n != n) {
      throw config_error("interaction table n=" + std::to_string(doc.n) +
                         " does not match source n=" + std::to_string(n));
    }
    const InteractionTable supplied{doc.n, std::move(doc.entries)};
    record("supplied_interactions_reconstruct_values",
           compare_tables(zeta_transform(supplied).entries(), values.entries(), true,
                          kVerifyTolerance));
  }
  if (src.ground_truth && src.description.value("sigma", 0.0) == 0.0 &&
      src.description.value("background", 0) == 0) {
    record("planted_ground_truth", compare_tables(interactions.entries(),
                                                  src.ground_truth->entries(), false,
                                                  kVerifyTolerance));
  }

  std::vector<std::string> files{checks.write(dir.path(), "verify", config.format)};
  nlohmann::ordered_json summary{{"source", src.description}, {"pass", pass}};
  summary["offending_mask"] = offending ? nlohmann::ordered_json(offending->bits)
                                        : nlohmann::ordered_json(nullptr);
  detail::write_manifest(dir.path(), config, summary, files);
  dir.commit();
  out << (pass ? "verify: pass" : "verify: FAIL") << "\n";
  if (!pass) {
    throw analysis_failure("verification failed at mask " + std::to_string(offending->bits));
  }
  return kSuccess;
}

inline int run_curve(const RunConfig& config, std::ostream& out) {
  auto src = open_source(config.source, config);
  const int n = src.oracle->size();
  MatchingSample sample = MatchingSample::all();
  if (config.sample_all) {
    if (n > kExhaustiveMatchingMaxPlayers) {
      throw config_error("--sample all refused for n=" + std::to_string(n));
    }
  } else if (config.sample) {
    sample = MatchingSample::random(std::min(*config.sample, lattice_size(n)),
                                    config.source.seed);
  } else if (n > kExhaustiveMatchingMaxPlayers) {
    sample = MatchingSample::random(std::min(kDefaultSampleBudget, lattice_size(n)),
                                    config.source.seed);
  }
  RunDirectory dir(config.out, config.force);
  const auto values = detail::evaluate(src, config);
  const auto interactions = mobius_inverse(values, config.parallelism);

  std::vector<std::string> files;
  RecordTable strength({"rank", "abs_effect"});
  std::int64_t rank = 0;
  for (double s : strength_curve(interactions)) strength.add({++rank, s});
  files.push_back(strength.write(dir.path(), "strength", config.format));

  const auto counts = detail::effective_counts(
      config.salient_counts.empty() ? default_salient_counts() : config.salient_counts,
      interactions.size());
  RecordTable summary({"M", "mean_rmse", "max_rmse", "records"});
  for (std::size_t m : counts) {
    const auto curve = matching_curve(values, interactions, m, config.half_window, sample);
    RecordTable records({"index", "mask", "v_real", "v_approx", "error", "windowed_rmse"});
    std::int64_t i = 0;
    for (const auto& r : curve.records) {
      records.add({i++, static_cast<std::int64_t>(r.mask.bits), r.v_real, r.v_approx, r.error,
                   r.windowed_rmse});
    }
    files.push_back(records.write(dir.path(), "matching_M" + std::to_string(m), config.format));
    summary.add({static_cast<std::int64_t>(m), curve.mean_rmse(), curve.max_rmse(),
                 static_cast<std::int64_t>(curve.records.size())});
    out << "M=" << m << " mean windowed RMSE " << format_double(curve.mean_rmse()) << "\n";
  }
  files.push_back(summary.write(dir.path(), "curve_summary", config.format));

  detail::write_manifest(dir.path(), config,
                         {{"source", src.description},
                          {"effective_M", counts},
                          {"sample", sample.count ? nlohmann::ordered_json(*sample.count)
                                                  : nlohmann::ordered_json("all")}},
                         files);
  dir.commit();
  return kSuccess;
}

inline int run_transfer(const RunConfig& config, std::ostream& out) {
  if (!config.mapping_file) throw config_error("transfer needs --mapping");
  const auto pairs = detail::read_mapping(*config.mapping_file);
  if (pairs.empty()) throw config_error("shared-word mapping is empty; nothing to compare");
  if (pairs.size() > 20) throw config_error("at most 20 shared words are supported");

  auto src_a = open_source(config.source, config);
  auto src_b = open_source(config.source_b, config);
  const int slots = static_cast<int>(pairs.size());
  std::vector<std::pair<int, int>> map_a;
  std::vector<std::pair<int, int>> map_b;
  for (int k = 0; k < slots; ++k) {
    map_a.emplace_back(pairs[static_cast<std::size_t>(k)].first, k);
    map_b.emplace_back(pairs[static_cast<std::size_t>(k)].second, k);
  }
  std::optional<SharedPlayers> shared_a;
  std::optional<SharedPlayers> shared_b;
  try {
    shared_a.emplace(src_a.oracle->size(), slots, map_a);
    shared_b.emplace(src_b.oracle->size(), slots, map_b);
  } catch (const domain_error& e) {
    throw config_error(std::string{"invalid shared-word mapping: "} + e.what());
  }

  RunDirectory dir(config.out, config.force);
  const auto inter_a = mobius_inverse(detail::evaluate(src_a, config), config.parallelism);
  const auto inter_b = mobius_inverse(detail::evaluate(src_b, config), config.parallelism);

  const auto counts = detail::effective_counts(
      config.salient_counts.empty() ? default_transfer_counts() : config.salient_counts,
      std::min(inter_a.size(), inter_b.size()));
  RecordTable records({"M", "similarity", "nonzero_slots_a", "nonzero_slots_b"});
  auto nonzero = [](const ConceptVector& v) {
    std::int64_t c = 0;
    for (std::size_t i = 0; i < v.slots(); ++i) c += (v.pos()[i] != 0.0 || v.neg()[i] != 0.0);
    return c;
  };
  for (std::size_t m : counts) {
    const auto va = build_concept_vector(extract_salient(inter_a, m), *shared_a);
    const auto vb = build_concept_vector(extract_salient(inter_b, m), *shared_b);
    Cell sim = nullptr;
    try {
      sim = jaccard_similarity(va, vb);
      out << "M=" << m << " sim=" << detail::fixed(std::get<double>(sim)) << "\n";
    } catch (const undefined_similarity&) {
      out << "M=" << m << " sim=undefined (no shared salient concepts on either side)\n";
    }
    records.add({static_cast<std::int64_t>(m), sim, nonzero(va), nonzero(vb)});
  }
  std::vector<std::string> files{records.write(dir.path(), "similarity", config.format)};

  std::vector<std::string> shared_words;
  for (const auto& [a, b] : pairs) {
    shared_words.push_back(src_a.labels[static_cast<std::size_t>(a)] + "=" +
                           src_b.labels[static_cast<std::size_t>(b)]);
  }
  detail::write_manifest(dir.path(), config,
                         {{"source", src_a.description},
                          {"source_b", src_b.description},
                          {"shared_words", shared_words},
                          {"effective_M", counts}},
                         files);
  dir.commit();
  return kSuccess;
}

inline int run_attribute(const RunConfig& config, std::ostream& out) {
  auto src = open_source(config.source, config);
  RunDirectory dir(config.out, config.force);
  const auto values = detail::evaluate(src, config);
  const auto interactions = mobius_inverse(values, config.parallelism);
  const PlayerSet players(src.labels);
  const double target_value = values[full_mask(values.n())];

  std::vector<std::string> files;
  const auto counts = detail::effective_counts(
      config.salient_counts.empty() ? default_salient_counts() : config.salient_counts,
      interactions.size());
  for (std::size_t m : counts) {
    auto report = attribute_error(interactions, m, players);
    report.target = config.target;
    report.target_value = target_value;

    RecordTable records({"rank", "mask", "concept", "effect"});
    std::vector<std::pair<std::string, double>> shown;
    std::int64_t rank = 0;
    for (const auto& e : report.entries) {
      records.add({++rank, static_cast<std::int64_t>(e.mask.bits), e.concept_label, e.effect});
      shown.emplace_back(e.concept_label, e.effect);
    }
    const std::string stem = "attribution_M" + std::to_string(m);
    files.push_back(records.write(dir.path(), stem, config.format));
    const std::string text = "Predicted word: " + (config.target.empty() ? "?" : config.target) +
                             "  (v(x) = " + detail::fixed(target_value) + ")\n" +
                             "Salient concepts with positive effect (M=" + std::to_string(m) +
                             "): " + std::to_string(shown.size()) + "\n\n" +
                             detail::concept_table(shown);
    harsanyi::detail::write_file(dir.path() / (stem + ".txt"), text);
    files.push_back(stem + ".txt");
    out << text << "\n";
  }
  detail::write_manifest(dir.path(), config,
                         {{"source", src.description},
                          {"target", config.target},
                          {"target_value", target_value},
                          {"effective_M", counts}},
                         files);
  dir.commit();
  return kSuccess;
}

/// Runs one command, mapping failures to exit codes and a diagnostic on `err`.
inline int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.parallelism < 1) throw config_error("--parallelism must be at least 1");
    if (config.timeout_ms < 1) throw config_error("--timeout-ms must be positive");
    if (config.max_in_flight < 1) throw config_error("--max-in-flight must be at least 1");
    if (config.retries < 0) throw config_error("--retries must be nonnegative");
    if (config.command == "extract") return run_extract(config, out);
    if (config.command == "verify") return run_verify(config, out);
    if (config.command == "curve") return run_curve(config, out);
    if (config.command == "transfer") return run_transfer(config, out);
    if (config.command == "attribute") return run_attribute(config, out);
    throw config_error("unknown command " + config.command);
  } catch (const analysis_failure& e) {
    err << "error: " << e.what() << "\n";
    return kAnalysisFailure;
  } catch (const config_error& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const evaluation_error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const oracle_error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const io_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const domain_error& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  }
}

}  // namespace harsanyi::cli
