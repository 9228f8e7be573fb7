#pragma once

#include "duokit/duobft.hpp"

namespace duokit {

/// Multi-chain variant: m concurrent chain lanes under one primary.
/// Commands are spread round-robin and pinned to a lane; execution is
/// barriered by round so every replica merges the lanes in the same order.
/// Round r executes, per model, once every lane has committed its height-r
/// block; lanes then execute in ascending instance order.
class MultiChainReplica final : public DuobftReplicaBase {
 public:
  MultiChainReplica() = default;
  MultiChainReplica(DuobftConfig cfg, KeyDirectory keys, KeyPair usig_keypair, VerifyCache* cache)
      : DuobftReplicaBase(std::move(cfg), std::move(keys), std::move(usig_keypair), cache) {}

  std::uint64_t executed_rounds(CommitModel m) const {
    return executed_round_[static_cast<int>(m)];
  }

 private:
  void dispatch_command(const Command& cmd) override {
    auto key = std::make_pair(cmd.client, cmd.sequence);
    auto it = lane_pin_.find(key);
    std::uint32_t lane;
    if (it != lane_pin_.end()) {
      lane = it->second;  // retransmissions stay on the original lane
    } else {
      lane = dispatch_cursor_;
      dispatch_cursor_ = (dispatch_cursor_ + 1) % static_cast<std::uint32_t>(lanes_.size());
      lane_pin_.emplace(key, lane);
    }
    lane_enqueue(lanes_[lane], cmd);
  }

  void on_lane_committed(CommitModel model, LaneState& lane, std::uint64_t height,
                         Effects& e) override {
    committed_[static_cast<int>(model)][height].insert(lane.instance);
    advance_rounds(model, e);
  }

  void advance_rounds(CommitModel model, Effects& e) {
    auto& table = committed_[static_cast<int>(model)];
    auto& done = executed_round_[static_cast<int>(model)];
    while (true) {
      std::uint64_t round = done + 1;
      auto it = table.find(round);
      if (it == table.end() || it->second.size() < lanes_.size()) break;
      for (auto& lane : lanes_) execute_block(model, lane, round, e);
      table.erase(it);
      ++done;
    }
  }

  /// Lanes that fell behind the furthest-proposed height get empty blocks,
  /// otherwise a quiet lane would stall every round barrier.
  bool lane_needs_catchup(const LaneState& lane) const override {
    std::uint64_t target = 0;
    for (const auto& l : lanes_) target = std::max(target, l.last_proposed);
    return lane.last_proposed < target;
  }

  std::uint32_t dispatch_cursor_ = 0;
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint32_t> lane_pin_;
  std::map<std::uint64_t, std::set<std::uint32_t>> committed_[2];
  std::uint64_t executed_round_[2] = {0, 0};
};

}  // namespace duokit
