#pragma once

#include <future>
#include <iomanip>
#include <thread>

#include "duokit/checkers.hpp"
#include "duokit/metrics.hpp"
#include "duokit/scenario.hpp"

namespace duokit {

/// One simulated run plus its verdicts and metrics.
struct RunReport {
  std::uint64_t seed = 0;
  RunResult result;
  Verdict safety_hybrid;
  Verdict safety_bft;
  Verdict liveness;
  Metrics metrics;

  bool all_pass() const {
    return safety_hybrid.pass && safety_bft.pass && liveness.pass;
  }
};

inline RunReport run_and_check(const SimPlan& plan, std::uint64_t seed) {
  RunReport report;
  report.seed = seed;
  report.result = run_simulation(plan, seed);
  ParsedTrace trace = parse_trace(report.result.trace);
  report.safety_hybrid = check_safety(trace, CommitModel::kHybrid);
  report.safety_bft = plan.protocol == Protocol::kFlexMinbft
                          ? Verdict{}
                          : check_safety(trace, CommitModel::kBft);
  report.liveness = check_liveness(trace);
  report.metrics = compute_metrics(trace);
  return report;
}

/// Fans independent (plan, seed) runs across a thread pool; results come
/// back in seed order regardless of completion order.
inline std::vector<RunReport> run_many(const SimPlan& plan, const std::vector<std::uint64_t>& seeds,
                                       unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<RunReport> out(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) break;
      out[i] = run_and_check(plan, seeds[i]);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, seeds.size()); ++t)
    pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

// --- quorum parameter tables -------------------------------------------------

inline std::string duobft_matrix_table(std::uint32_t f_from, std::uint32_t f_to) {
  std::ostringstream os;
  os << "f    n    hybrid  bft  viewchange  reqviewchange\n";
  for (std::uint32_t f = f_from; f <= f_to; ++f) {
    QuorumParams p = duobft_params(f);
    os << std::left << std::setw(5) << f << std::setw(5) << p.n << std::setw(8) << p.commit_hybrid
       << std::setw(5) << *p.commit_bft << std::setw(12) << p.view_change << p.req_view_change
       << "\n";
  }
  return os.str();
}

inline std::string flexminbft_matrix_table(std::uint32_t n, std::uint32_t f_from,
                                           std::uint32_t f_to) {
  std::ostringstream os;
  os << "n    f    commit  viewchange  reqviewchange\n";
  for (std::uint32_t f = f_from; f <= f_to; ++f) {
    if (n < 2 * f + 1) {
      os << std::left << std::setw(5) << n << std::setw(5) << f << "unattainable\n";
      continue;
    }
    QuorumParams p = flexminbft_params(n, f);
    os << std::left << std::setw(5) << n << std::setw(5) << f << std::setw(8) << p.commit_hybrid
       << std::setw(12) << p.view_change << p.req_view_change << "\n";
  }
  return os.str();
}

// --- sweeps ------------------------------------------------------------------

/// Applies one "key=value" override to a plan. Supported keys cover the
/// evaluation-style sweeps: batch_size, payload_size, instances, clients, f.
inline SimPlan apply_param(SimPlan plan, const std::string& key, std::uint64_t value) {
  if (key == "batch_size") {
    plan.batch_size = static_cast<std::uint32_t>(value);
  } else if (key == "payload_size") {
    plan.clients.payload_size = static_cast<std::uint32_t>(value);
  } else if (key == "instances") {
    plan.instances = static_cast<std::uint32_t>(value);
  } else if (key == "clients") {
    plan.clients.count = static_cast<std::uint32_t>(value);
  } else if (key == "f") {
    std::uint32_t f = static_cast<std::uint32_t>(value);
    plan.params = plan.protocol == Protocol::kFlexMinbft ? flexminbft_params(3 * f + 1, f)
                                                         : duobft_params(f);
  } else {
    throw std::invalid_argument("unknown sweep parameter: " + key);
  }
  plan.validate();
  return plan;
}

struct SweepRow {
  std::uint64_t value = 0;
  RunReport report;
};

inline std::vector<SweepRow> sweep(const SimPlan& base, const std::string& key,
                                   const std::vector<std::uint64_t>& values,
                                   std::uint64_t seed) {
  std::vector<SweepRow> rows(values.size());
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= values.size()) break;
      rows[i].value = values[i];
      rows[i].report = run_and_check(apply_param(base, key, values[i]), seed);
    }
  };
  for (unsigned t = 0; t < std::min<std::size_t>(threads, values.size()); ++t)
    pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return rows;
}

inline std::string metrics_table_header() {
  return "param      model  accepted  p50ms  p95ms  p99ms  tput/s   views  msgs/cmd";
}

inline std::string metrics_row(const std::string& label, const Metrics& m) {
  std::ostringstream os;
  auto row = [&](const char* model, const Metrics::ModelStats& s) {
    os << std::left << std::setw(11) << label << std::setw(7) << model << std::setw(10)
       << s.accepted << std::setw(7) << s.p50_ms << std::setw(7) << s.p95_ms << std::setw(7)
       << s.p99_ms << std::setw(9) << std::fixed << std::setprecision(1) << s.throughput_per_s
       << std::setw(7) << m.view_installs << std::setprecision(1) << m.msgs_per_accepted;
  };
  row("H", m.hybrid);
  if (m.bft.accepted > 0) {
    os << "\n";
    row("B", m.bft);
  }
  return os.str();
}

}  // namespace duokit
