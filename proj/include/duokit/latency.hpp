#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace duokit {

/// Region-to-region round-trip times; nodes map onto regions round-robin.
/// Symmetric, with the in-region diagonal no larger than any off-diagonal
/// entry. One-way delay is half the RTT, floored at 1ms.
struct LatencyMatrix {
  std::string name;
  std::vector<std::string> regions;
  std::vector<std::vector<std::uint32_t>> rtt_ms;

  std::uint32_t region_of(std::uint32_t node) const {
    return node % static_cast<std::uint32_t>(regions.size());
  }

  std::uint64_t one_way_ms(std::uint32_t node_a, std::uint32_t node_b) const {
    std::uint32_t rtt = rtt_ms[region_of(node_a)][region_of(node_b)];
    return std::max<std::uint64_t>(1, rtt / 2);
  }

  void validate() const {
    if (regions.empty() || rtt_ms.size() != regions.size())
      throw std::invalid_argument("latency matrix shape mismatch");
    for (std::size_t i = 0; i < rtt_ms.size(); ++i) {
      if (rtt_ms[i].size() != regions.size())
        throw std::invalid_argument("latency matrix shape mismatch");
      for (std::size_t j = 0; j < rtt_ms.size(); ++j) {
        if (rtt_ms[i][j] != rtt_ms[j][i]) throw std::invalid_argument("latency matrix asymmetric");
        if (rtt_ms[i][i] > rtt_ms[i][j])
          throw std::invalid_argument("latency matrix diagonal exceeds off-diagonal");
      }
    }
  }

  /// Every hop takes exactly one simulated millisecond.
  static LatencyMatrix unit() {
    LatencyMatrix m;
    m.name = "unit";
    m.regions = {"local"};
    m.rtt_ms = {{2}};
    return m;
  }

  /// Ten-region wide-area matrix. The inter-region bands follow the
  /// published shape of a geo-replicated cloud deployment — under 30ms RTT
  /// inside North America, under 150ms between North America and Europe,
  /// about 240ms between Canada and South-East Asia — with the remaining
  /// pairs interpolated. An approximation, not a measurement.
  static LatencyMatrix wan10() {
    LatencyMatrix m;
    m.name = "wan10";
    m.regions = {"eastus", "westus", "southcentralus", "centralus", "canadacentral",
                 "canadaeast", "uksouth", "northeurope", "westeurope", "southeastasia"};
    m.rtt_ms = {
        //  eus  wus  scus  cus  cac  cae  uks  neu  weu  sea
        {2, 28, 18, 14, 16, 14, 76, 88, 84, 226},    // eastus
        {28, 2, 24, 20, 26, 30, 136, 140, 134, 170},  // westus
        {18, 24, 2, 12, 22, 26, 96, 104, 100, 198},   // southcentralus
        {14, 20, 12, 2, 18, 22, 92, 100, 96, 192},    // centralus
        {16, 26, 22, 18, 2, 8, 88, 96, 92, 238},      // canadacentral
        {14, 30, 26, 22, 8, 2, 84, 92, 88, 244},      // canadaeast
        {76, 136, 96, 92, 88, 84, 2, 20, 14, 186},    // uksouth
        {88, 140, 104, 100, 96, 92, 20, 2, 22, 196},  // northeurope
        {84, 134, 100, 96, 92, 88, 14, 22, 2, 180},   // westeurope
        {226, 170, 198, 192, 238, 244, 186, 196, 180, 2},  // southeastasia
    };
    return m;
  }

  static LatencyMatrix by_name(const std::string& name) {
    if (name == "unit") return unit();
    if (name == "wan10") return wan10();
    throw std::invalid_argument("unknown latency matrix: " + name);
  }
};

}  // namespace duokit
