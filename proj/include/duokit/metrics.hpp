#pragma once

#include <algorithm>
#include <map>

#include "duokit/trace.hpp"

namespace duokit {

/// Client-observed latency (submit to f+1 matching replies) and committed
/// throughput per commit model, plus coarse protocol-cost counters.
struct Metrics {
  struct ModelStats {
    std::uint64_t accepted = 0;
    std::uint64_t p50_ms = 0;
    std::uint64_t p95_ms = 0;
    std::uint64_t p99_ms = 0;
    double throughput_per_s = 0.0;
  };
  ModelStats hybrid;
  ModelStats bft;
  std::uint64_t duration_ms = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t view_installs = 0;
  double msgs_per_accepted = 0.0;

  nlohmann::json to_json() const {
    auto model = [](const ModelStats& s) {
      return nlohmann::json{{"accepted", s.accepted},
                            {"p50_ms", s.p50_ms},
                            {"p95_ms", s.p95_ms},
                            {"p99_ms", s.p99_ms},
                            {"throughput_per_s", s.throughput_per_s}};
    };
    return nlohmann::json{{"hybrid", model(hybrid)},
                          {"bft", model(bft)},
                          {"duration_ms", duration_ms},
                          {"deliveries", deliveries},
                          {"view_installs", view_installs},
                          {"msgs_per_accepted", msgs_per_accepted}};
  }
};

namespace detail {

inline std::uint64_t percentile(std::vector<std::uint64_t>& v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * v.size())));
  return v[rank - 1];
}

}  // namespace detail

inline Metrics compute_metrics(const ParsedTrace& trace) {
  Metrics m;
  if (!trace.ok()) return m;
  m.duration_ms = trace.end_time;

  std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint64_t> submit_time;
  std::vector<std::uint64_t> lat_h, lat_b;
  std::uint64_t max_view = 0;
  for (const auto& rec : trace.records) {
    if (rec.type == "deliver") {
      ++m.deliveries;
    } else if (rec.type == "submit" && rec.fields.size() >= 2) {
      submit_time[{rec.node, std::stoull(rec.fields[0])}] = rec.time;
    } else if (rec.type == "accept" && rec.fields.size() >= 2) {
      auto it = submit_time.find({rec.node, std::stoull(rec.fields[0])});
      if (it == submit_time.end()) continue;
      std::uint64_t latency = rec.time - it->second;
      if (rec.fields[1] == "H")
        lat_h.push_back(latency);
      else
        lat_b.push_back(latency);
    } else if (rec.type == "view" && !rec.fields.empty()) {
      max_view = std::max(max_view, static_cast<std::uint64_t>(std::stoull(rec.fields[0])));
    }
  }
  m.view_installs = max_view;

  auto fill = [&](Metrics::ModelStats& s, std::vector<std::uint64_t>& lat) {
    s.accepted = lat.size();
    s.p50_ms = detail::percentile(lat, 0.50);
    s.p95_ms = detail::percentile(lat, 0.95);
    s.p99_ms = detail::percentile(lat, 0.99);
    if (m.duration_ms > 0)
      s.throughput_per_s = 1000.0 * static_cast<double>(s.accepted) /
                           static_cast<double>(m.duration_ms);
  };
  fill(m.hybrid, lat_h);
  fill(m.bft, lat_b);
  std::uint64_t total = m.hybrid.accepted + m.bft.accepted;
  if (total > 0) m.msgs_per_accepted = static_cast<double>(m.deliveries) / total;
  return m;
}

}  // namespace duokit
