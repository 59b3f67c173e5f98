// harsanyi: exhaustive interaction analysis of a black-box value function.
//
//   harsanyi extract   --oracle planted:K=15 --n 10 --seed 7 --out run1
//   harsanyi verify    --oracle table:values.json --interactions interactions.json --out chk
//   harsanyi curve     --oracle planted:K=40,background=400 --n 14 --out fig
//   harsanyi transfer  --oracle ... --oracle-b ... --mapping shared.json --out sim
//   harsanyi attribute --oracle exec:"python host.py" --target Newton --out why

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "harsanyi/cli.hpp"

namespace {

using harsanyi::cli::RunConfig;

void add_source_options(CLI::App* cmd, harsanyi::cli::SourceConfig& source,
                        const std::string& suffix, bool required) {
  auto* o = cmd->add_option("--oracle" + suffix, source.oracle,
                            "Oracle source: planted:K=..,  table:<path>, exec:<cmd>, "
                            "tcp:<host>:<port>");
  if (required) o->required();
  cmd->add_option("--n" + suffix, source.n, "Player count (required for planted sources)");
  cmd->add_option("--seed" + suffix, source.seed, "Seed for synthetic sources and sampling");
}

void add_common_options(CLI::App* cmd, RunConfig& config, std::string& format,
                        std::string& sample) {
  cmd->add_option("--M", config.salient_counts, "Salient counts (comma separated)")
      ->delimiter(',');
  cmd->add_option("--window-t", config.half_window, "Half-window for windowed RMSE");
  cmd->add_option("--sample", sample, "Matching sample budget: <count> or all");
  cmd->add_option("--out", config.out, "Output directory")->required();
  cmd->add_flag("--force", config.force, "Replace an existing output directory");
  cmd->add_option("--parallelism", config.parallelism, "Concurrent oracle queries");
  cmd->add_option("--timeout-ms", config.timeout_ms, "Per-request timeout for external hosts");
  cmd->add_option("--max-in-flight", config.max_in_flight,
                  "Pipelined requests per external batch");
  cmd->add_option("--retries", config.retries, "Retries per failed batch");
  cmd->add_option("--format", format, "Record format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--report-floor", config.report_floor,
                  "Hide |I| at or below this value in text reports");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harsanyi interaction analysis of black-box value functions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", harsanyi::kVersion);

  RunConfig config;
  std::string format = "csv";
  std::string sample;

  auto* extract = app.add_subcommand("extract", "Evaluate, invert and report salient concepts");
  auto* verify = app.add_subcommand("verify", "Check reconstruction and reference equivalence");
  auto* curve = app.add_subcommand("curve", "Emit strength and matching curves");
  auto* transfer = app.add_subcommand("transfer", "Concept similarity between two inputs");
  auto* attribute = app.add_subcommand("attribute", "Concepts pushing toward a wrong word");

  for (auto* cmd : {extract, verify, curve, transfer, attribute}) {
    add_source_options(cmd, config.source, "", true);
    add_common_options(cmd, config, format, sample);
  }
  verify->add_flag("--reference,!--no-reference", config.reference,
                   "Compare against the brute-force inversion (n <= 16)");
  verify->add_option("--interactions", config.interactions_file,
                     "Interaction table that must reconstruct the source values");
  add_source_options(transfer, config.source_b, "-b", true);
  transfer->add_option("--mapping", config.mapping_file,
                       "JSON [{\"a\": int, \"b\": int}] shared-word pairs")
      ->required();
  attribute->add_option("--target", config.target, "The predicted (wrong) word");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : harsanyi::cli::kConfigFailure;
  }

  config.command = app.get_subcommands().front()->get_name();
  config.format = format == "json" ? harsanyi::RecordFormat::json : harsanyi::RecordFormat::csv;
  if (sample == "all") {
    config.sample_all = true;
  } else if (!sample.empty()) {
    try {
      config.sample = std::stoull(sample);
    } catch (const std::exception&) {
      std::cerr << "configuration error: --sample must be a count or 'all'\n";
      return harsanyi::cli::kConfigFailure;
    }
  }
  return harsanyi::cli::run(config, std::cout, std::cerr);
}
