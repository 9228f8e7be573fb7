#pragma once

#include <deque>
#include <unordered_set>

#include "duokit/duobft.hpp"

namespace duokit {

/// Exhaustive small-model exploration: breadth-first search over every
/// delivery order of the bounded message set a short chained run
/// generates, deduplicating joint states by digest. Timers are disabled,
/// so runs stay inside one view; the checked property is within-view
/// agreement per commit rule.
struct EnumerationResult {
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t hybrid_violations = 0;
  std::uint64_t bft_violations = 0;
  bool truncated = false;
};

class DuobftEnumerator {
 public:
  DuobftEnumerator(std::uint32_t f, std::uint32_t commands, bool compromised_primary,
                   std::uint64_t state_cap = 4'000'000)
      : f_(f), commands_(commands), compromised_(compromised_primary), cap_(state_cap) {}

  EnumerationResult run() {
    EnumerationResult out;
    State initial = make_initial();
    std::unordered_set<std::string> seen;
    std::deque<State> frontier;
    seen.insert(key_of(initial));
    check_state(initial, out);
    frontier.push_back(std::move(initial));
    while (!frontier.empty()) {
      if (out.states >= cap_) {
        out.truncated = true;
        break;
      }
      State state = std::move(frontier.front());
      frontier.pop_front();
      ++out.states;
      for (std::size_t i = 0; i < state.in_flight.size(); ++i) {
        ++out.transitions;
        State next = deliver(state, i);
        std::string key = key_of(next);
        if (seen.insert(key).second) {
          check_state(next, out);
          frontier.push_back(std::move(next));
        }
      }
    }
    return out;
  }

 private:
  struct Packet {
    NodeId dest;
    Bytes bytes;
    ProtocolMessage msg;
  };

  struct State {
    std::vector<DuobftReplica> replicas;
    std::vector<Packet> in_flight;  // canonical order: sorted by (dest, bytes)
  };

  QuorumParams params() const { return duobft_params(f_); }

  State make_initial() {
    QuorumParams p = params();
    std::vector<KeyPair> usig_keys;
    KeyDirectory dir = make_key_directory(p.n, 7, &usig_keys);
    State st;
    for (std::uint32_t r = 0; r < p.n; ++r) {
      ReplicaConfig rc;
      rc.id = ReplicaId{r};
      rc.params = p;
      rc.batch_size = 1;
      if (r == 0 && compromised_) {
        rc.fault.behavior = NodeBehavior::kCompromisedEquivocate;
        rc.fault.equivocate_height = 1;
      }
      DuobftConfig dc{rc, CommPattern::kQuadratic, Pacing::kBftQc, 1};
      st.replicas.emplace_back(dc, dir, usig_keys[r], &cache_);
    }
    // Preload the primary's queue: one command per block.
    for (std::uint32_t i = 0; i < commands_; ++i) {
      Command cmd;
      cmd.client = 1000 + i;
      cmd.sequence = 1;
      cmd.response_model = ResponseModel::kHybrid;
      cmd.payload = {static_cast<std::uint8_t>(i)};
      Effects e;
      st.replicas[0].handle(ClientRequestMsg{cmd}, e);
      absorb(st, 0, e);
    }
    normalize(st);
    return st;
  }

  State deliver(const State& state, std::size_t index) {
    State next = state;
    Packet packet = next.in_flight[index];
    next.in_flight.erase(next.in_flight.begin() + static_cast<std::ptrdiff_t>(index));
    Effects e;
    next.replicas[packet.dest].handle(packet.msg, e);
    absorb(next, packet.dest, e);
    normalize(next);
    return next;
  }

  /// Sends become in-flight packets; timer and trace effects are dropped
  /// (no clock in the model). Client-bound replies leave the system.
  void absorb(State& st, NodeId sender, Effects& e) {
    std::uint32_t n = params().n;
    for (const auto& send : e.sends) {
      std::vector<NodeId> dests;
      if (send.dest == kAllReplicas) {
        for (std::uint32_t r = 0; r < n; ++r)
          if (r != sender) dests.push_back(r);
      } else if (send.dest < n) {
        dests.push_back(send.dest);
      }
      if (dests.empty()) continue;
      Bytes bytes = encode(send.msg);
      for (NodeId d : dests) st.in_flight.push_back({d, bytes, send.msg});
    }
  }

  void normalize(State& st) {
    std::sort(st.in_flight.begin(), st.in_flight.end(), [](const Packet& a, const Packet& b) {
      if (a.dest != b.dest) return a.dest < b.dest;
      return a.bytes < b.bytes;
    });
    st.in_flight.erase(std::unique(st.in_flight.begin(), st.in_flight.end(),
                                   [](const Packet& a, const Packet& b) {
                                     return a.dest == b.dest && a.bytes == b.bytes;
                                   }),
                       st.in_flight.end());
  }

  std::string key_of(const State& st) {
    Writer w;
    for (const auto& r : st.replicas) {
      Digest d = r.state_digest();
      w.raw(d.bytes.data(), d.bytes.size());
    }
    for (const auto& p : st.in_flight) {
      w.u32(p.dest);
      Digest d = hash(p.bytes);
      w.raw(d.bytes.data(), d.bytes.size());
    }
    Digest k = hash(w.peek());
    return std::string(k.bytes.begin(), k.bytes.end());
  }

  void check_state(const State& st, EnumerationResult& out) {
    std::uint64_t max_h = 0;
    for (const auto& r : st.replicas)
      max_h = std::max({max_h, r.hybrid_frontier(), r.bft_frontier()});
    for (std::uint64_t h = 1; h <= max_h; ++h) {
      for (CommitModel model : {CommitModel::kHybrid, CommitModel::kBft}) {
        std::optional<Digest> first;
        bool conflict = false;
        for (std::uint32_t r = 0; r < st.replicas.size(); ++r) {
          if (compromised_ && r == 0) continue;  // scripted-faulty node
          auto dig = st.replicas[r].committed_at(model, 0, h);
          if (!dig) continue;
          if (!first) {
            first = dig;
          } else if (*first != *dig) {
            conflict = true;
          }
        }
        if (conflict) {
          if (model == CommitModel::kHybrid)
            ++out.hybrid_violations;
          else
            ++out.bft_violations;
        }
      }
    }
  }

  std::uint32_t f_;
  std::uint32_t commands_;
  bool compromised_;
  std::uint64_t cap_;
  VerifyCache cache_;
};

inline EnumerationResult enumerate_duobft(std::uint32_t f, std::uint32_t commands,
                                          bool compromised_primary,
                                          std::uint64_t state_cap = 4'000'000) {
  DuobftEnumerator e(f, commands, compromised_primary, state_cap);
  return e.run();
}

}  // namespace duokit
