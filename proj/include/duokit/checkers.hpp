#pragma once

#include <map>
#include <set>

#include "duokit/messages.hpp"
#include "duokit/trace.hpp"

namespace duokit {

struct Verdict {
  bool pass = true;
  bool checker_error = false;
  std::string detail;

  static Verdict fail(std::string d) { return {false, false, std::move(d)}; }
  static Verdict error(std::string d) { return {false, true, std::move(d)}; }
};

namespace detail {

// (instance, height) -> digest, in commit order per node.
using CommitMap = std::map<std::pair<std::uint32_t, std::uint64_t>, std::string>;

inline std::map<std::uint32_t, CommitMap> committed_by_node(const ParsedTrace& trace,
                                                            CommitModel model) {
  std::map<std::uint32_t, CommitMap> out;
  const char* want = model_name(model);
  for (const auto& rec : trace.records) {
    if (rec.type != "commit" || rec.fields.size() < 4 || rec.fields[0] != want) continue;
    std::uint32_t instance = static_cast<std::uint32_t>(std::stoul(rec.fields[1]));
    std::uint64_t height = std::stoull(rec.fields[2]);
    out[rec.node][{instance, height}] = rec.fields[3];
  }
  return out;
}

}  // namespace detail

/// Safety checker: pure function of the trace. PASS iff, restricted to
/// replicas the scenario kept correct,
///   (a) no two replicas committed different blocks at any (instance,
///       height) under the model,
///   (b) every replica's per-instance committed heights are the contiguous
///       prefix 1..k (so sequences are mutual prefixes), and
///   (c) the BFT-committed sequence is a prefix of the hybrid one at every
///       replica, unless the scenario scripted a compromised USIG.
Verdict check_safety(const ParsedTrace& trace, CommitModel model) {
  if (!trace.ok()) return Verdict::error(trace.error);
  if (!trace.complete) return Verdict::error("truncated trace: no end marker");

  auto by_node = detail::committed_by_node(trace, model);

  // (b) contiguity per node/instance.
  for (const auto& [node, commits] : by_node) {
    if (!trace.node_correct(node)) continue;
    std::map<std::uint32_t, std::uint64_t> max_h;
    for (const auto& [key, dig] : commits)
      max_h[key.first] = std::max(max_h[key.first], key.second);
    for (const auto& [inst, top] : max_h) {
      for (std::uint64_t h = 1; h <= top; ++h) {
        if (!commits.count({inst, h}))
          return Verdict::fail("node " + std::to_string(node) + " committed height " +
                               std::to_string(top) + " with hole at " + std::to_string(h) +
                               " instance " + std::to_string(inst));
      }
    }
  }

  // (a) cross-replica agreement per (instance, height).
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::pair<std::uint32_t, std::string>> seen;
  for (const auto& [node, commits] : by_node) {
    if (!trace.node_correct(node)) continue;
    for (const auto& [key, dig] : commits) {
      auto it = seen.find(key);
      if (it == seen.end()) {
        seen[key] = {node, dig};
      } else if (it->second.second != dig) {
        return Verdict::fail("conflicting commits at instance " + std::to_string(key.first) +
                             " height " + std::to_string(key.second) + ": node " +
                             std::to_string(it->second.first) + " has " + it->second.second +
                             ", node " + std::to_string(node) + " has " + dig);
      }
    }
  }

  // (c) cross-model prefix, honest-USIG runs only.
  bool compromised = trace.header.value("compromised_usig", false);
  if (model == CommitModel::kBft && !compromised) {
    auto hybrid = detail::committed_by_node(trace, CommitModel::kHybrid);
    for (const auto& [node, commits] : by_node) {
      if (!trace.node_correct(node)) continue;
      for (const auto& [key, dig] : commits) {
        auto hn = hybrid.find(node);
        if (hn == hybrid.end() || !hn->second.count(key) || hn->second.at(key) != dig)
          return Verdict::fail("node " + std::to_string(node) +
                               " BFT-committed outside its hybrid prefix at height " +
                               std::to_string(key.second));
      }
    }
  }
  return {};
}

/// Liveness checker. PASS iff the run finished with every client request
/// accepted under each requested model, and at most f+1 views were
/// installed after the stabilization time.
Verdict check_liveness(const ParsedTrace& trace) {
  if (!trace.ok()) return Verdict::error(trace.error);
  if (!trace.complete) return Verdict::error("truncated trace: no end marker");
  if (trace.end_status != "done")
    return Verdict::fail("run ended with status " + trace.end_status);

  std::map<std::pair<std::uint32_t, std::uint64_t>, std::string> wanted;  // (client,seq) -> models
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::set<std::string>> got;
  for (const auto& rec : trace.records) {
    if (rec.type == "submit" && rec.fields.size() >= 2)
      wanted[{rec.node, std::stoull(rec.fields[0])}] = rec.fields[1];
    else if (rec.type == "accept" && rec.fields.size() >= 2)
      got[{rec.node, std::stoull(rec.fields[0])}].insert(rec.fields[1]);
  }
  for (const auto& [key, models] : wanted) {
    for (char m : models) {
      std::string name(1, m);
      if (!got.count(key) || !got.at(key).count(name))
        return Verdict::fail("client " + std::to_string(key.first) + " request " +
                             std::to_string(key.second) + " never accepted under model " + name);
    }
  }

  std::uint64_t gst = trace.header.value("gst_ms", std::uint64_t{0});
  std::uint64_t f = trace.header.value("f", std::uint64_t{0});
  std::map<std::uint32_t, std::uint64_t> installs_after_gst;
  for (const auto& rec : trace.records) {
    if (rec.type != "view" || !trace.node_correct(rec.node)) continue;
    if (rec.time >= gst) installs_after_gst[rec.node] += 1;
  }
  for (const auto& [node, count] : installs_after_gst) {
    if (count > f + 1)
      return Verdict::fail("node " + std::to_string(node) + " installed " +
                           std::to_string(count) + " views after GST (budget " +
                           std::to_string(f + 1) + ")");
  }
  return {};
}

}  // namespace duokit
