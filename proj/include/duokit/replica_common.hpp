#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "duokit/messages.hpp"
#include "duokit/quorum.hpp"

namespace duokit {

using NodeId = std::uint32_t;

/// Destination meaning "every replica except the sender".
inline constexpr NodeId kAllReplicas = 0xffffffff;

enum class TimerKind : std::uint8_t {
  kProgress = 0,
  kViewChangeWait = 1,
  kRetransmit = 2,
  kClientRetry = 3,
};

inline const char* timer_name(TimerKind k) {
  switch (k) {
    case TimerKind::kProgress: return "progress";
    case TimerKind::kViewChangeWait: return "vcwait";
    case TimerKind::kRetransmit: return "retransmit";
    default: return "clientretry";
  }
}

/// Everything a handler wants done: messages out, timers armed, state
/// transitions recorded. The simulation loop drains this after each event;
/// handlers themselves never touch the clock or the network.
struct Effects {
  struct Send {
    NodeId dest = 0;
    ProtocolMessage msg;
  };
  struct Timer {
    TimerKind kind = TimerKind::kProgress;
    std::uint64_t delay_ms = 0;
    std::uint64_t generation = 0;
  };

  std::vector<Send> sends;
  std::vector<Timer> timers;
  std::vector<std::string> records;  // trace tails, stamped by the simulator

  void send(NodeId dest, ProtocolMessage msg) { sends.push_back({dest, std::move(msg)}); }
  void broadcast(ProtocolMessage msg) { sends.push_back({kAllReplicas, std::move(msg)}); }
  void arm(TimerKind kind, std::uint64_t delay_ms, std::uint64_t generation) {
    timers.push_back({kind, delay_ms, generation});
  }
  void record(std::string line) { records.push_back(std::move(line)); }

  void record_commit(CommitModel m, std::uint32_t instance, std::uint64_t height,
                     const Digest& dig) {
    std::ostringstream os;
    os << "commit " << model_name(m) << ' ' << instance << ' ' << height << ' ' << dig.short_hex();
    record(os.str());
  }
  void record_exec(CommitModel m, std::uint32_t instance, std::uint64_t height,
                   std::size_t applied) {
    std::ostringstream os;
    os << "exec " << model_name(m) << ' ' << instance << ' ' << height << ' ' << applied;
    record(os.str());
  }
  void record_view(std::uint64_t view) { record("view " + std::to_string(view)); }
  void record_event(const std::string& tag) { record("event " + tag); }
};

/// Replicated-service state for one commit model: a running state digest
/// plus the per-client duplicate-execution guard.
struct ExecLedger {
  Digest state;
  std::unordered_map<std::uint32_t, std::uint64_t> last_executed;  // V_req

  /// Applies one command unless its sequence is stale for the client.
  bool apply(const Command& c) {
    std::uint64_t& last = last_executed[c.client];
    if (c.sequence <= last) return false;
    last = c.sequence;
    Writer w;
    w.raw(state.bytes.data(), state.bytes.size());
    w.u32(c.client);
    w.u64(c.sequence);
    Digest payload = hash(c.payload);
    w.raw(payload.bytes.data(), payload.bytes.size());
    state = hash(w.peek());
    return true;
  }
};

enum class NodeBehavior : std::uint8_t {
  kCorrect = 0,
  kCrash,
  kSilentPrimary,
  kEquivocate,            // conflicting proposal with an invalid attestation
  kCompromisedEquivocate, // conflicting proposals signed with a reused counter
  kDropOutbound,
  kReproposeDuplicate,    // minbft: re-prepare an executed command under a new UI
  kTruncateViewChangeLog, // minbft: omit a suffix of the own-message log
};

/// Per-node adversary script. The network-level knobs (drop probability on
/// outbound links) are applied by the simulator; the message-shaping
/// behaviors are consulted by the replica code itself.
struct NodeFault {
  NodeBehavior behavior = NodeBehavior::kCorrect;
  std::uint64_t crash_at_ms = 0;
  std::uint64_t silent_view = 0;            // act silent while primary of this view
  std::uint64_t silent_after_height = 0;    // 0: silent from the start of that view
  std::uint64_t equivocate_height = 1;
  double drop_outbound_prob = 0.0;

  bool is_byzantine() const { return behavior != NodeBehavior::kCorrect; }
  bool compromises_usig() const { return behavior == NodeBehavior::kCompromisedEquivocate; }
};

/// Static per-replica configuration shared by all protocol variants.
struct ReplicaConfig {
  ReplicaId id;
  QuorumParams params;
  std::uint32_t batch_size = kDefaultBatchSize;
  std::uint64_t base_timeout_ms = 400;
  std::uint64_t retransmit_ms = 300;
  NodeFault fault;
};

inline std::uint32_t primary_of(std::uint64_t view, std::uint32_t n) {
  return static_cast<std::uint32_t>(view % n);
}

}  // namespace duokit
