#pragma once

#include <json.hpp>

#include <fstream>

#include "duokit/simnet.hpp"

namespace duokit {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known)
      throw std::invalid_argument(std::string("unknown key \"") + it.key() + "\" in " + where);
  }
}

inline NodeFault parse_node_fault(const nlohmann::json& j) {
  reject_unknown_keys(j, "faults.nodes entry",
                      {"behavior", "at_ms", "view", "after_height", "height", "prob"});
  NodeFault f;
  std::string b = j.at("behavior").get<std::string>();
  if (b == "correct") f.behavior = NodeBehavior::kCorrect;
  else if (b == "crash") f.behavior = NodeBehavior::kCrash;
  else if (b == "silent_primary") f.behavior = NodeBehavior::kSilentPrimary;
  else if (b == "equivocate") f.behavior = NodeBehavior::kEquivocate;
  else if (b == "compromised_equivocate") f.behavior = NodeBehavior::kCompromisedEquivocate;
  else if (b == "drop_outbound") f.behavior = NodeBehavior::kDropOutbound;
  else if (b == "repropose_duplicate") f.behavior = NodeBehavior::kReproposeDuplicate;
  else if (b == "truncate_viewchange_log") f.behavior = NodeBehavior::kTruncateViewChangeLog;
  else throw std::invalid_argument("unknown fault behavior: " + b);
  f.crash_at_ms = j.value("at_ms", std::uint64_t{0});
  f.silent_view = j.value("view", std::uint64_t{0});
  f.silent_after_height = j.value("after_height", std::uint64_t{0});
  f.equivocate_height = j.value("height", std::uint64_t{1});
  f.drop_outbound_prob = j.value("prob", 0.0);
  return f;
}

}  // namespace detail

/// Scenario files are JSON with a fixed schema; unknown keys anywhere are
/// rejected so a typo in a fault script cannot silently disable it.
inline SimPlan load_scenario_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(
      j, "scenario",
      {"name", "protocol", "n", "f", "comm_pattern", "pacing", "instances", "batch_size",
       "payload_size", "clients", "latency_matrix", "faults", "timeouts", "max_time_ms",
       "key_base"});
  SimPlan plan;
  plan.name = j.value("name", std::string("scenario"));

  std::string proto = j.at("protocol").get<std::string>();
  if (proto == "flex_minbft") plan.protocol = Protocol::kFlexMinbft;
  else if (proto == "duobft") plan.protocol = Protocol::kDuobft;
  else if (proto == "mc_duobft") plan.protocol = Protocol::kMcDuobft;
  else throw std::invalid_argument("unknown protocol: " + proto);

  std::uint32_t f = j.at("f").get<std::uint32_t>();
  if (plan.protocol == Protocol::kFlexMinbft) {
    plan.params = flexminbft_params(j.at("n").get<std::uint32_t>(), f);
  } else {
    plan.params = duobft_params(f);
    if (j.contains("n") && j.at("n").get<std::uint32_t>() != plan.params.n)
      throw std::invalid_argument("n must equal 3f+1 for this protocol");
  }

  std::string comm = j.value("comm_pattern", std::string("quadratic"));
  if (comm == "quadratic") plan.comm = CommPattern::kQuadratic;
  else if (comm == "linear") plan.comm = CommPattern::kLinear;
  else throw std::invalid_argument("unknown comm_pattern: " + comm);

  std::string pacing = j.value("pacing", std::string("bft_qc"));
  if (pacing == "bft_qc") plan.pacing = Pacing::kBftQc;
  else if (pacing == "hybrid_qc") plan.pacing = Pacing::kHybridQc;
  else throw std::invalid_argument("unknown pacing: " + pacing);

  plan.instances = j.value("instances", 1u);
  plan.batch_size = j.value("batch_size", kDefaultBatchSize);
  if (plan.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  if (j.contains("clients")) {
    const auto& c = j.at("clients");
    detail::reject_unknown_keys(c, "clients",
                                {"count", "requests_per_client", "hybrid_pct", "bft_pct",
                                 "both_pct", "retry_ms"});
    plan.clients.count = c.value("count", 1u);
    plan.clients.requests_per_client = c.value("requests_per_client", 1u);
    plan.clients.hybrid_pct = c.value("hybrid_pct", 100u);
    plan.clients.bft_pct = c.value("bft_pct", 0u);
    plan.clients.both_pct = c.value("both_pct", 0u);
    plan.clients.retry_ms = c.value("retry_ms", std::uint64_t{800});
    if (plan.clients.hybrid_pct + plan.clients.bft_pct + plan.clients.both_pct != 100)
      throw std::invalid_argument("client model mix must sum to 100");
  }
  plan.clients.payload_size = j.value("payload_size", kDefaultPayloadSize);

  plan.matrix = LatencyMatrix::by_name(j.value("latency_matrix", std::string("unit")));

  if (j.contains("faults")) {
    const auto& fj = j.at("faults");
    detail::reject_unknown_keys(fj, "faults",
                                {"nodes", "partitions", "drop_prob", "dup_prob", "jitter_ms",
                                 "gst_ms", "pre_gst_extra_ms"});
    if (fj.contains("nodes")) {
      for (auto it = fj.at("nodes").begin(); it != fj.at("nodes").end(); ++it) {
        std::uint32_t node = static_cast<std::uint32_t>(std::stoul(it.key()));
        plan.node_faults[node] = detail::parse_node_fault(it.value());
      }
    }
    if (fj.contains("partitions")) {
      for (const auto& pj : fj.at("partitions")) {
        detail::reject_unknown_keys(pj, "partition", {"side", "from_ms", "to_ms"});
        PartitionSpec p;
        for (const auto& s : pj.at("side")) p.side.insert(s.get<std::uint32_t>());
        p.from_ms = pj.at("from_ms").get<std::uint64_t>();
        p.to_ms = pj.at("to_ms").get<std::uint64_t>();
        plan.net.partitions.push_back(std::move(p));
      }
    }
    plan.net.drop_prob = fj.value("drop_prob", 0.0);
    plan.net.dup_prob = fj.value("dup_prob", 0.0);
    plan.net.jitter_ms = fj.value("jitter_ms", 0u);
    plan.net.gst_ms = fj.value("gst_ms", std::uint64_t{0});
    plan.net.pre_gst_extra_ms = fj.value("pre_gst_extra_ms", 0u);
  }

  if (j.contains("timeouts")) {
    const auto& t = j.at("timeouts");
    detail::reject_unknown_keys(t, "timeouts", {"base_ms", "retransmit_ms"});
    plan.base_timeout_ms = t.value("base_ms", std::uint64_t{400});
    plan.retransmit_ms = t.value("retransmit_ms", std::uint64_t{300});
  }
  plan.max_time_ms = j.value("max_time_ms", std::uint64_t{60000});
  plan.key_base = j.value("key_base", std::uint64_t{1});

  plan.validate();
  return plan;
}

inline SimPlan load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw std::invalid_argument(std::string("scenario parse error: ") + ex.what());
  }
  return load_scenario_json(j);
}

}  // namespace duokit
