#pragma once

#include <json.hpp>

#include <memory>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include "duokit/latency.hpp"
#include "duokit/minbft.hpp"
#include "duokit/multichain.hpp"

namespace duokit {

enum class Protocol : std::uint8_t { kFlexMinbft = 0, kDuobft = 1, kMcDuobft = 2 };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kFlexMinbft: return "flex_minbft";
    case Protocol::kDuobft: return "duobft";
    default: return "mc_duobft";
  }
}

struct PartitionSpec {
  std::set<std::uint32_t> side;
  std::uint64_t from_ms = 0;
  std::uint64_t to_ms = 0;
};

/// Network-level adversary: message loss and duplication (before the
/// stabilization time), delivery jitter, and timed partitions. After
/// gst_ms the network delivers within matrix + jitter bounds.
struct NetFaults {
  double drop_prob = 0.0;
  double dup_prob = 0.0;
  std::uint32_t jitter_ms = 0;
  std::uint64_t gst_ms = 0;
  std::uint32_t pre_gst_extra_ms = 0;
  std::vector<PartitionSpec> partitions;
};

struct ClientPlan {
  std::uint32_t count = 1;
  std::uint32_t requests_per_client = 1;
  std::uint32_t hybrid_pct = 100;
  std::uint32_t bft_pct = 0;
  std::uint32_t both_pct = 0;
  std::uint32_t payload_size = kDefaultPayloadSize;
  std::uint64_t retry_ms = 800;
};

/// Complete description of one simulated run (minus the seed).
struct SimPlan {
  std::string name = "scenario";
  Protocol protocol = Protocol::kDuobft;
  QuorumParams params;
  CommPattern comm = CommPattern::kQuadratic;
  Pacing pacing = Pacing::kBftQc;
  std::uint32_t instances = 1;
  std::uint32_t batch_size = kDefaultBatchSize;
  ClientPlan clients;
  LatencyMatrix matrix = LatencyMatrix::unit();
  NetFaults net;
  std::map<std::uint32_t, NodeFault> node_faults;
  std::uint64_t base_timeout_ms = 400;
  std::uint64_t retransmit_ms = 300;
  std::uint64_t max_time_ms = 60000;
  std::uint64_t key_base = 1;

  std::uint32_t n() const { return params.n; }

  /// The loader refuses scripts that exceed the fault budget, by module
  /// contract.
  void validate() const {
    std::uint32_t faulty = 0, compromised = 0;
    for (const auto& [node, fault] : node_faults) {
      if (node >= params.n) throw std::invalid_argument("fault script names unknown replica");
      if (fault.is_byzantine()) ++faulty;
      if (fault.compromises_usig()) ++compromised;
    }
    if (faulty > params.f) throw std::invalid_argument("fault script exceeds f budget");
    if (compromised > params.f)
      throw std::invalid_argument("compromised-USIG budget exceeds f");
    if (protocol == Protocol::kFlexMinbft &&
        (clients.bft_pct > 0 || clients.both_pct > 0))
      throw std::invalid_argument("flex_minbft serves only hybrid-model clients");
    if (protocol != Protocol::kMcDuobft && instances != 1)
      throw std::invalid_argument("multiple instances require mc_duobft");
    if (instances < 1) throw std::invalid_argument("instances must be >= 1");
    matrix.validate();
  }

  nlohmann::json header_json(std::uint64_t seed) const {
    nlohmann::json faults = nlohmann::json::object();
    bool compromised = false;
    std::vector<std::uint32_t> correct;
    for (std::uint32_t r = 0; r < params.n; ++r) {
      auto it = node_faults.find(r);
      if (it == node_faults.end() || !it->second.is_byzantine()) correct.push_back(r);
    }
    for (const auto& [node, fault] : node_faults) {
      faults[std::to_string(node)] = static_cast<int>(fault.behavior);
      if (fault.compromises_usig()) compromised = true;
    }
    return nlohmann::json{{"name", name},
                          {"protocol", protocol_name(protocol)},
                          {"n", params.n},
                          {"f", params.f},
                          {"instances", instances},
                          {"seed", seed},
                          {"gst_ms", net.gst_ms},
                          {"max_time_ms", max_time_ms},
                          {"clients", clients.count},
                          {"requests_per_client", clients.requests_per_client},
                          {"correct", correct},
                          {"faults", faults},
                          {"compromised_usig", compromised}};
  }
};

/// Closed-loop client: one outstanding command, accepted on f+1 matching
/// model-tagged replies, then the next command goes out.
class ClientNode {
 public:
  ClientNode() = default;
  ClientNode(NodeId node, ResponseModel model, const ClientPlan& plan, std::uint32_t f)
      : node_(node), model_(model), plan_(plan), f_(f) {}

  bool done() const { return seq_ > plan_.requests_per_client; }

  void start(Effects& e) { submit(e); }

  void handle(const ProtocolMessage& msg, Effects& e) {
    const auto* reply = std::get_if<ClientReplyMsg>(&msg);
    if (!reply || done()) return;
    if (reply->client != node_ || reply->sequence != seq_) return;
    int mi = static_cast<int>(reply->model);
    if (!wants(reply->model) || accepted_[mi]) return;
    auto& tally = tallies_[mi][reply->result];
    tally.insert(reply->replica);
    if (tally.size() >= f_ + 1) {
      accepted_[mi] = true;
      std::ostringstream os;
      os << "accept " << seq_ << ' ' << model_name(reply->model);
      e.record(os.str());
      if (all_accepted()) {
        ++seq_;
        submit(e);
      }
    }
  }

  void handle_timer(TimerKind kind, std::uint64_t gen, Effects& e) {
    if (kind != TimerKind::kClientRetry || done() || gen != seq_) return;
    e.broadcast(ClientRequestMsg{current_command()});  // retransmit
    e.arm(TimerKind::kClientRetry, plan_.retry_ms, seq_);
  }

 private:
  bool wants(CommitModel m) const {
    if (model_ == ResponseModel::kBoth) return true;
    return (m == CommitModel::kHybrid) == (model_ == ResponseModel::kHybrid);
  }

  bool all_accepted() const {
    bool need_h = model_ != ResponseModel::kBft;
    bool need_b = model_ != ResponseModel::kHybrid;
    return (!need_h || accepted_[0]) && (!need_b || accepted_[1]);
  }

  Command current_command() const {
    Command c;
    c.client = node_;
    c.sequence = seq_;
    c.response_model = model_;
    c.payload.resize(plan_.payload_size);
    // Deterministic payload, independent of everything but (client, seq).
    Writer w;
    w.u32(node_);
    w.u64(seq_);
    Digest d = hash(w.peek());
    for (std::size_t i = 0; i < c.payload.size(); ++i) c.payload[i] = d.bytes[i % 32];
    return c;
  }

  void submit(Effects& e) {
    if (done()) return;
    accepted_[0] = accepted_[1] = false;
    tallies_[0].clear();
    tallies_[1].clear();
    std::ostringstream os;
    os << "submit " << seq_ << ' '
       << (model_ == ResponseModel::kHybrid ? "H" : model_ == ResponseModel::kBft ? "B" : "HB");
    e.record(os.str());
    e.broadcast(ClientRequestMsg{current_command()});
    e.arm(TimerKind::kClientRetry, plan_.retry_ms, seq_);
  }

  NodeId node_ = 0;
  ResponseModel model_ = ResponseModel::kHybrid;
  ClientPlan plan_;
  std::uint32_t f_ = 0;
  std::uint64_t seq_ = 1;
  bool accepted_[2] = {false, false};
  std::map<Digest, std::set<std::uint32_t>> tallies_[2];
};

enum class RunStatus : std::uint8_t { kDone = 0, kMaxTime = 1, kDeadlock = 2 };

inline const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kDone: return "done";
    case RunStatus::kMaxTime: return "max_time";
    default: return "deadlock";
  }
}

struct RunResult {
  std::vector<std::string> trace;
  RunStatus status = RunStatus::kDone;
  std::uint64_t end_time_ms = 0;
};

/// Deterministic discrete-event simulation: one totally ordered event
/// queue (delivery time, then insertion sequence) drives every replica and
/// client; equal (plan, seed) runs produce byte-identical traces.
class Simulation {
 public:
  Simulation(SimPlan plan, std::uint64_t seed) : plan_(std::move(plan)), seed_(seed) {
    plan_.validate();
    rng_.seed(seed_ ^ 0x6a09e667f3bcc908ULL);
    build_nodes();
  }

  RunResult run() {
    RunResult out;
    out.trace.push_back("header " + plan_.header_json(seed_).dump());

    for (auto& [node, fault] : plan_.node_faults)
      if (fault.behavior == NodeBehavior::kCrash)
        queue_.push(Event{fault.crash_at_ms, next_seq_++, Event::kCrash, node, nullptr,
                          TimerKind::kProgress, 0});

    for (std::uint32_t c = 0; c < plan_.clients.count; ++c) {
      Effects e;
      clients_[c].start(e);
      drain(replica_count() + c, 0, e, out);
    }

    RunStatus status = RunStatus::kDone;
    std::uint64_t now = 0;
    while (true) {
      if (all_clients_done()) {
        status = RunStatus::kDone;
        break;
      }
      if (queue_.empty()) {
        status = all_clients_done() ? RunStatus::kDone : RunStatus::kDeadlock;
        break;
      }
      Event ev = queue_.top();
      if (ev.time > plan_.max_time_ms) {
        status = all_clients_done() ? RunStatus::kDone : RunStatus::kMaxTime;
        break;
      }
      queue_.pop();
      now = ev.time;
      process(ev, out);
    }

    if (status != RunStatus::kDone) dump_state(now, out);
    std::ostringstream os;
    os << "end " << now << ' ' << run_status_name(status);
    out.trace.push_back(os.str());
    out.status = status;
    out.end_time_ms = now;
    return out;
  }

 private:
  using ReplicaVariant = std::variant<std::monostate, MinbftReplica, DuobftReplica,
                                      MultiChainReplica>;

  struct Envelope {
    Bytes bytes;
    ProtocolMessage msg;
    const char* kind;
  };

  struct Event {
    std::uint64_t time;
    std::uint64_t seq;
    enum Kind : std::uint8_t { kDeliver, kTimer, kCrash } kind;
    NodeId dest;
    std::shared_ptr<const Envelope> env;
    TimerKind tkind;
    std::uint64_t tgen;

    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      return seq > o.seq;
    }
  };

  std::uint32_t replica_count() const { return plan_.params.n; }

  bool all_clients_done() const {
    for (const auto& c : clients_)
      if (!c.done()) return false;
    return true;
  }

  void build_nodes() {
    std::vector<KeyPair> usig_keys;
    KeyDirectory dir = make_key_directory(plan_.params.n, plan_.key_base, &usig_keys);
    replicas_.resize(plan_.params.n);
    crashed_.assign(plan_.params.n + plan_.clients.count, false);
    for (std::uint32_t r = 0; r < plan_.params.n; ++r) {
      ReplicaConfig rc;
      rc.id = ReplicaId{r};
      rc.params = plan_.params;
      rc.batch_size = plan_.batch_size;
      rc.base_timeout_ms = plan_.base_timeout_ms;
      rc.retransmit_ms = plan_.retransmit_ms;
      auto it = plan_.node_faults.find(r);
      if (it != plan_.node_faults.end()) rc.fault = it->second;
      switch (plan_.protocol) {
        case Protocol::kFlexMinbft:
          replicas_[r].emplace<MinbftReplica>(rc, dir, usig_keys[r], &cache_);
          break;
        case Protocol::kDuobft: {
          DuobftConfig dc{rc, plan_.comm, plan_.pacing, 1};
          replicas_[r].emplace<DuobftReplica>(dc, dir, usig_keys[r], &cache_);
          break;
        }
        case Protocol::kMcDuobft: {
          DuobftConfig dc{rc, plan_.comm, plan_.pacing, plan_.instances};
          replicas_[r].emplace<MultiChainReplica>(dc, dir, usig_keys[r], &cache_);
          break;
        }
      }
    }
    std::uint32_t count = plan_.clients.count;
    for (std::uint32_t c = 0; c < count; ++c) {
      std::uint32_t pct = count ? (c * 100) / count : 0;
      ResponseModel model = pct < plan_.clients.hybrid_pct ? ResponseModel::kHybrid
                            : pct < plan_.clients.hybrid_pct + plan_.clients.bft_pct
                                ? ResponseModel::kBft
                                : ResponseModel::kBoth;
      clients_.emplace_back(replica_count() + c, model, plan_.clients, plan_.params.f);
    }
  }

  template <typename Fn>
  void with_replica(std::uint32_t r, Fn&& fn) {
    std::visit(
        [&](auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (!std::is_same_v<T, std::monostate>) fn(node);
        },
        replicas_[r]);
  }

  std::uint64_t replica_view(std::uint32_t r) {
    std::uint64_t v = 0;
    with_replica(r, [&](auto& node) { v = node.view(); });
    return v;
  }

  void process(const Event& ev, RunResult& out) {
    if (ev.kind == Event::kCrash) {
      crashed_[ev.dest] = true;
      out.trace.push_back(line(ev.time, ev.dest, "event crash"));
      return;
    }
    if (crashed_[ev.dest]) return;
    Effects e;
    if (ev.kind == Event::kDeliver) {
      out.trace.push_back(line(ev.time, ev.dest,
                               std::string("deliver ") + ev.env->kind + ' ' +
                                   to_hex(ev.env->bytes)));
      if (ev.dest < replica_count())
        with_replica(ev.dest, [&](auto& node) { node.handle(ev.env->msg, e); });
      else
        clients_[ev.dest - replica_count()].handle(ev.env->msg, e);
    } else {
      out.trace.push_back(line(ev.time, ev.dest,
                               std::string("timer ") + timer_name(ev.tkind)));
      if (ev.dest < replica_count())
        with_replica(ev.dest, [&](auto& node) { node.handle_timer(ev.tkind, ev.tgen, e); });
      else
        clients_[ev.dest - replica_count()].handle_timer(ev.tkind, ev.tgen, e);
    }
    drain(ev.dest, ev.time, e, out);
  }

  /// Applies sender-side faults, network faults, and delays, then turns
  /// effects into future events.
  void drain(NodeId sender, std::uint64_t now, Effects& e, RunResult& out) {
    for (const auto& rec : e.records) out.trace.push_back(line(now, sender, rec));

    bool suppressed = outbound_suppressed(sender);
    const NodeFault* fault = nullptr;
    if (sender < replica_count()) {
      auto it = plan_.node_faults.find(sender);
      if (it != plan_.node_faults.end()) fault = &it->second;
    }

    for (const auto& send : e.sends) {
      if (suppressed) break;
      auto env = std::make_shared<Envelope>();
      env->msg = send.msg;
      env->bytes = encode(send.msg);
      env->kind = message_kind(send.msg);

      std::vector<NodeId> dests;
      if (send.dest == kAllReplicas) {
        for (std::uint32_t r = 0; r < replica_count(); ++r)
          if (r != sender) dests.push_back(r);
      } else {
        dests.push_back(send.dest);
      }
      for (NodeId dest : dests) {
        if (dest >= crashed_.size() || crashed_[dest]) continue;
        if (fault && fault->behavior == NodeBehavior::kDropOutbound &&
            chance(fault->drop_outbound_prob))
          continue;
        if (partitioned(sender, dest, now)) continue;
        bool pre_gst = plan_.net.gst_ms == 0 || now < plan_.net.gst_ms;
        if (pre_gst && plan_.net.drop_prob > 0 && chance(plan_.net.drop_prob)) continue;
        schedule_delivery(sender, dest, now, env);
        if (plan_.net.dup_prob > 0 && chance(plan_.net.dup_prob))
          schedule_delivery(sender, dest, now, env);
      }
    }
    for (const auto& t : e.timers)
      queue_.push(Event{now + std::max<std::uint64_t>(1, t.delay_ms), next_seq_++, Event::kTimer,
                        sender, nullptr, t.kind, t.generation});
  }

  void schedule_delivery(NodeId from, NodeId dest, std::uint64_t now,
                         std::shared_ptr<const Envelope> env) {
    queue_.push(Event{now + delivery_delay(from, dest, now), next_seq_++, Event::kDeliver, dest,
                      std::move(env), TimerKind::kProgress, 0});
  }

  std::uint64_t delivery_delay(NodeId from, NodeId to, std::uint64_t now) {
    std::uint64_t d = plan_.matrix.one_way_ms(from, to);
    bool pre_gst = now < plan_.net.gst_ms;
    if (pre_gst && plan_.net.pre_gst_extra_ms > 0)
      d += rng_() % (plan_.net.pre_gst_extra_ms + 1);
    if (plan_.net.jitter_ms > 0) d += rng_() % (plan_.net.jitter_ms + 1);
    return std::max<std::uint64_t>(1, d);
  }

  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
  }

  bool partitioned(NodeId a, NodeId b, std::uint64_t now) const {
    for (const auto& p : plan_.net.partitions) {
      if (now < p.from_ms || now >= p.to_ms) continue;
      bool in_a = p.side.count(a) > 0;
      bool in_b = p.side.count(b) > 0;
      if (in_a != in_b) return true;
    }
    return false;
  }

  bool outbound_suppressed(NodeId sender) {
    if (sender >= replica_count()) return false;
    auto it = plan_.node_faults.find(sender);
    if (it == plan_.node_faults.end()) return false;
    const NodeFault& fault = it->second;
    if (fault.behavior != NodeBehavior::kSilentPrimary) return false;
    std::uint64_t view = replica_view(sender);
    if (view != fault.silent_view) return false;
    if (primary_of(view, plan_.params.n) != sender) return false;
    if (fault.silent_after_height == 0) return true;
    std::uint64_t sent = 0;
    with_replica(sender, [&](auto& node) { sent = node.proposals_sent(); });
    return sent >= fault.silent_after_height;
  }

  void dump_state(std::uint64_t now, RunResult& out) {
    for (std::uint32_t r = 0; r < replica_count(); ++r) {
      std::ostringstream os;
      os << "event dump view=" << replica_view(r) << " crashed=" << (crashed_[r] ? 1 : 0);
      bool pending = false;
      with_replica(r, [&](auto& node) { pending = node.work_pending(); });
      os << " pending=" << (pending ? 1 : 0);
      out.trace.push_back(line(now, r, os.str()));
    }
  }

  static std::string line(std::uint64_t time, NodeId node, const std::string& tail) {
    std::ostringstream os;
    os << time << ' ' << node << ' ' << tail;
    return os.str();
  }

  SimPlan plan_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  VerifyCache cache_;
  std::vector<ReplicaVariant> replicas_;
  std::vector<ClientNode> clients_;
  std::vector<bool> crashed_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t next_seq_ = 0;
};

/// Runs one (plan, seed) pair from scratch.
inline RunResult run_simulation(const SimPlan& plan, std::uint64_t seed) {
  Simulation sim(plan, seed);
  return sim.run();
}

}  // namespace duokit
