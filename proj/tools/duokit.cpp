#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "duokit/enumerate.hpp"
#include "duokit/harness.hpp"

using namespace duokit;

namespace {

std::string out_path(const std::string& name) {
  const char* dir = std::getenv("DUOKIT_OUT_DIR");
  if (!dir || !*dir) return name;
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

void print_verdict(const char* what, const Verdict& v) {
  std::cout << what << ": " << (v.checker_error ? "ERROR" : v.pass ? "PASS" : "FAIL");
  if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
  std::cout << "\n";
}

int report_exit(const RunReport& r, Protocol protocol) {
  print_verdict("safety[hybrid]", r.safety_hybrid);
  if (protocol != Protocol::kFlexMinbft) print_verdict("safety[bft]", r.safety_bft);
  print_verdict("liveness", r.liveness);
  std::cout << metrics_table_header() << "\n" << metrics_row("-", r.metrics) << "\n";
  return r.all_pass() ? 0 : 1;
}

std::vector<std::uint64_t> parse_values(const std::string& csv) {
  std::vector<std::uint64_t> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stoull(item));
  if (values.empty()) throw CLI::ValidationError("empty value list");
  return values;
}

std::pair<std::uint32_t, std::uint32_t> parse_range(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    std::uint32_t v = static_cast<std::uint32_t>(std::stoul(s));
    return {v, v};
  }
  return {static_cast<std::uint32_t>(std::stoul(s.substr(0, dots))),
          static_cast<std::uint32_t>(std::stoul(s.substr(dots + 2)))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duokit: hybrid/BFT consensus protocols in a deterministic network simulator"};
  app.require_subcommand(1);

  // run ------------------------------------------------------------------
  std::string run_scenario, run_trace, run_metrics;
  std::uint64_t run_seed = 1;
  auto* run_cmd = app.add_subcommand("run", "execute a scenario and check it");
  run_cmd->add_option("scenario", run_scenario, "scenario JSON file")->required();
  run_cmd->add_option("--seed", run_seed, "simulation seed");
  run_cmd->add_option("--trace", run_trace, "write the trace to this file");
  run_cmd->add_option("--metrics", run_metrics, "write metrics JSON to this file");

  // check ----------------------------------------------------------------
  std::string check_trace;
  auto* check_cmd = app.add_subcommand("check", "re-run the checkers on a stored trace");
  check_cmd->add_option("trace", check_trace, "trace file")->required();

  // sweep ----------------------------------------------------------------
  std::string sweep_scenario, sweep_param;
  std::uint64_t sweep_seed = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario across one parameter");
  sweep_cmd->add_option("scenario", sweep_scenario, "scenario JSON file")->required();
  sweep_cmd->add_option("--param", sweep_param, "key=v1,v2,... e.g. batch_size=10,50,200")
      ->required();
  sweep_cmd->add_option("--seed", sweep_seed, "simulation seed");

  // matrix ---------------------------------------------------------------
  std::string matrix_protocol = "duobft", matrix_f = "1..4";
  std::uint32_t matrix_n = 0;
  auto* matrix_cmd = app.add_subcommand("matrix", "print quorum-parameter tables");
  matrix_cmd->add_option("--protocol", matrix_protocol, "duobft or flex_minbft");
  matrix_cmd->add_option("--f", matrix_f, "fault bound or range, e.g. 1..8");
  matrix_cmd->add_option("--n", matrix_n, "system size (flex_minbft only)");

  // enumerate --------------------------------------------------------------
  bool enum_compromised = false;
  std::uint32_t enum_f = 1, enum_commands = 2;
  auto* enum_cmd =
      app.add_subcommand("enumerate", "exhaustively explore delivery orders at small scale");
  enum_cmd->add_flag("--compromised", enum_compromised, "compromise the primary's trusted counter");
  enum_cmd->add_option("--f", enum_f, "fault bound");
  enum_cmd->add_option("--commands", enum_commands, "commands (one block each)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      SimPlan plan = load_scenario_file(run_scenario);
      RunReport report = run_and_check(plan, run_seed);
      if (!run_trace.empty()) write_trace_file(out_path(run_trace), report.result.trace);
      if (!run_metrics.empty()) {
        std::ofstream mf(out_path(run_metrics));
        mf << report.metrics.to_json().dump(2) << "\n";
      }
      std::cout << "run " << plan.name << " seed=" << run_seed << " status="
                << run_status_name(report.result.status) << " end=" << report.result.end_time_ms
                << "ms\n";
      return report_exit(report, plan.protocol);
    }

    if (*check_cmd) {
      ParsedTrace trace = parse_trace_file(check_trace);
      if (!trace.ok()) {
        std::cerr << "checker error: " << trace.error << "\n";
        return 2;
      }
      std::string proto = trace.header.value("protocol", std::string("duobft"));
      Verdict h = check_safety(trace, CommitModel::kHybrid);
      Verdict b = proto == "flex_minbft" ? Verdict{} : check_safety(trace, CommitModel::kBft);
      Verdict l = check_liveness(trace);
      print_verdict("safety[hybrid]", h);
      if (proto != "flex_minbft") print_verdict("safety[bft]", b);
      print_verdict("liveness", l);
      Metrics m = compute_metrics(trace);
      std::cout << metrics_table_header() << "\n" << metrics_row("-", m) << "\n";
      if (h.checker_error || b.checker_error || l.checker_error) return 2;
      return (h.pass && b.pass && l.pass) ? 0 : 1;
    }

    if (*sweep_cmd) {
      auto eq = sweep_param.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--param expects key=v1,v2,...");
      std::string key = sweep_param.substr(0, eq);
      std::vector<std::uint64_t> values = parse_values(sweep_param.substr(eq + 1));
      SimPlan base = load_scenario_file(sweep_scenario);
      auto rows = sweep(base, key, values, sweep_seed);
      std::cout << metrics_table_header() << "\n";
      bool ok = true;
      for (const auto& row : rows) {
        std::cout << metrics_row(key + "=" + std::to_string(row.value), row.report.metrics)
                  << "\n";
        ok = ok && row.report.all_pass();
      }
      return ok ? 0 : 1;
    }

    if (*matrix_cmd) {
      auto [f_from, f_to] = parse_range(matrix_f);
      if (matrix_protocol == "duobft") {
        std::cout << duobft_matrix_table(f_from, f_to);
      } else if (matrix_protocol == "flex_minbft") {
        if (matrix_n == 0) throw CLI::ValidationError("flex_minbft table needs --n");
        std::cout << flexminbft_matrix_table(matrix_n, f_from, f_to);
      } else {
        throw CLI::ValidationError("unknown protocol: " + matrix_protocol);
      }
      return 0;
    }

    if (*enum_cmd) {
      EnumerationResult r = enumerate_duobft(enum_f, enum_commands, enum_compromised);
      std::cout << "states=" << r.states << " transitions=" << r.transitions
                << " hybrid_violations=" << r.hybrid_violations
                << " bft_violations=" << r.bft_violations
                << (r.truncated ? " (truncated)" : "") << "\n";
      bool expected = enum_compromised ? (r.hybrid_violations > 0 && r.bft_violations == 0)
                                       : (r.hybrid_violations == 0 && r.bft_violations == 0);
      return expected && !r.truncated ? 0 : 1;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
