#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "duokit/replica_common.hpp"
#include "duokit/usig.hpp"

namespace duokit {

enum class CommPattern : std::uint8_t { kQuadratic = 0, kLinear = 1 };
enum class Pacing : std::uint8_t { kBftQc = 0, kHybridQc = 1 };

struct DuobftConfig {
  ReplicaConfig base;
  CommPattern comm = CommPattern::kQuadratic;
  Pacing pacing = Pacing::kBftQc;
  std::uint32_t instances = 1;
};

/// Chained replica committing every block under two fault models.
///
/// Vote accounting, fixed by the step-count and fault-injection contracts:
/// the hybrid quorum counts f+1 Vote messages (a replica's own vote
/// included), while the BFT quorum counts the proposer's block attestation
/// plus 2f Vote messages. The proposal does not shortcut the hybrid
/// quorum, so a hybrid commit always takes one full vote exchange.
///
/// Lanes are independent chains sharing the replica's USIG and view
/// schedule; single-chain operation is lane 0. Subclasses decide what
/// happens when a lane commits (execute now, or barrier by round) and how
/// client commands are dispatched to lanes.
class DuobftReplicaBase {
 public:
  DuobftReplicaBase() = default;
  DuobftReplicaBase(DuobftConfig cfg, KeyDirectory keys, KeyPair usig_keypair, VerifyCache* cache)
      : cfg_(cfg),
        keys_(std::move(keys)),
        cache_(cache),
        usig_(cfg.base.id, std::move(usig_keypair),
              cfg.base.fault.compromises_usig() ? UsigMode::kCompromised : UsigMode::kHonest) {
    lanes_.resize(cfg_.instances);
    for (std::uint32_t i = 0; i < cfg_.instances; ++i) lanes_[i].instance = i;
  }
  virtual ~DuobftReplicaBase() = default;

  std::uint64_t view() const { return view_; }
  bool in_view_change() const { return phase_ == Phase::kViewChange; }
  ReplicaId id() const { return cfg_.base.id; }
  std::uint64_t proposals_sent() const { return proposals_sent_; }
  const ExecLedger& ledger(CommitModel m) const {
    return m == CommitModel::kHybrid ? hybrid_ledger_ : bft_ledger_;
  }
  std::uint64_t hybrid_frontier(std::uint32_t lane = 0) const {
    return lanes_[lane].hybrid_frontier;
  }
  std::uint64_t bft_frontier(std::uint32_t lane = 0) const { return lanes_[lane].bft_frontier; }

  bool work_pending() const {
    if (phase_ == Phase::kViewChange) return true;
    for (const auto& lane : lanes_) {
      if (!lane.pending.empty()) return true;
      if (lane.tip > lane.hybrid_frontier) return true;
      if (lane.bft_frontier < lane.max_bft_demand) return true;
    }
    return false;
  }

  /// Digest over the behavior-relevant state, used by the model-checking
  /// explorer to deduplicate interleavings.
  Digest state_digest() const {
    Writer w;
    w.u64(view_);
    w.u8(static_cast<std::uint8_t>(phase_));
    w.u64(pending_view_);
    w.u64(usig_.last_counter());
    w.u64(next_propose_counter_);
    w.u8(equivocated_ ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(consumed_proposes_.size()));
    for (const auto& [ctr, dig] : consumed_proposes_) {
      w.u64(ctr);
      w.raw(dig.bytes.data(), dig.bytes.size());
    }
    for (const auto& lane : lanes_) {
      w.u32(lane.instance);
      w.u64(lane.tip);
      w.u64(lane.last_proposed);
      w.u64(lane.hybrid_frontier);
      w.u64(lane.bft_frontier);
      w.u64(lane.max_bft_demand);
      for (const auto& [h, dig] : lane.chain_digest) {
        w.u64(h);
        w.raw(dig.bytes.data(), dig.bytes.size());
      }
      for (const auto& [h, dig] : lane.voted) {
        w.u64(h);
        w.raw(dig.bytes.data(), dig.bytes.size());
      }
      for (const auto& [h, by_digest] : lane.votes) {
        for (const auto& [dig, voters] : by_digest) {
          w.u64(h);
          w.raw(dig.bytes.data(), dig.bytes.size());
          for (const auto& [voter, entry] : voters) {
            w.u32(voter);
            w.u64(entry.ui.counter);
          }
        }
      }
      for (const auto& [h, by_digest] : lane.certs) {
        for (const auto& [dig, cp] : by_digest) {
          if (!cp.hybrid && !cp.bft) continue;
          w.u64(h);
          w.raw(dig.bytes.data(), dig.bytes.size());
          w.u8(static_cast<std::uint8_t>((cp.hybrid ? 1 : 0) | (cp.bft ? 2 : 0)));
        }
      }
      for (const auto& cmd : lane.pending) {
        w.u32(cmd.client);
        w.u64(cmd.sequence);
      }
      for (const auto& [client, seq] : lane.batched) {
        w.u32(client);
        w.u64(seq);
      }
    }
    w.raw(hybrid_ledger_.state.bytes.data(), hybrid_ledger_.state.bytes.size());
    w.raw(bft_ledger_.state.bytes.data(), bft_ledger_.state.bytes.size());
    return hash(w.peek());
  }

  /// Committed digest at (lane, height) if committed under the model.
  std::optional<Digest> committed_at(CommitModel model, std::uint32_t lane_idx,
                                     std::uint64_t height) const {
    const LaneState& lane = lanes_[lane_idx];
    std::uint64_t frontier =
        model == CommitModel::kHybrid ? lane.hybrid_frontier : lane.bft_frontier;
    if (height > frontier) return std::nullopt;
    auto it = lane.chain_digest.find(height);
    if (it == lane.chain_digest.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t lane_count() const { return static_cast<std::uint32_t>(lanes_.size()); }

  void handle(const ProtocolMessage& msg, Effects& e) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ClientRequestMsg>) on_client_request(m.command, e);
          else if constexpr (std::is_same_v<T, ProposeMsg>) on_propose(m, e);
          else if constexpr (std::is_same_v<T, VoteMsg>) on_vote(m, e);
          else if constexpr (std::is_same_v<T, CertBroadcastMsg>) on_cert(m, e);
          else if constexpr (std::is_same_v<T, ReqViewChangeMsg>) on_req_view_change(m, e);
          else if constexpr (std::is_same_v<T, ViewChangeMsg>) on_view_change(m, e);
          else if constexpr (std::is_same_v<T, NewViewMsg>) on_new_view(m, e);
        },
        msg);
  }

  void handle_timer(TimerKind kind, std::uint64_t generation, Effects& e) {
    switch (kind) {
      case TimerKind::kProgress:
        if (generation == progress_gen_ && phase_ == Phase::kNormal && work_pending())
          request_view_change(view_ + 1, e);
        break;
      case TimerKind::kViewChangeWait:
        if (generation == vc_wait_gen_ && phase_ == Phase::kViewChange)
          request_view_change(pending_view_ + 1, e);
        break;
      case TimerKind::kRetransmit:
        retransmit_armed_ = false;
        retransmit(e);
        break;
      default:
        break;
    }
  }

 protected:
  enum class Phase : std::uint8_t { kNormal, kViewChange };

  struct CertPair {
    std::optional<QuorumCertificate> hybrid;
    std::optional<QuorumCertificate> bft;
  };

  struct LaneState {
    std::uint32_t instance = 0;
    std::map<std::uint64_t, Block> chain;
    std::map<std::uint64_t, Digest> chain_digest;
    // height -> digest -> voter -> endorsement (Vote messages only)
    std::map<std::uint64_t, std::map<Digest, std::map<std::uint32_t, VoteEntry>>> votes;
    std::map<std::uint64_t, VoteEntry> propose_endorsement;
    std::map<std::uint64_t, std::map<Digest, CertPair>> certs;
    std::map<std::uint64_t, Digest> voted;  // our vote per height, this view
    std::map<std::uint64_t, ProposeMsg> future_blocks;
    std::uint64_t tip = 0;
    std::uint64_t last_proposed = 0;
    std::uint64_t hybrid_frontier = 0;
    std::uint64_t bft_frontier = 0;
    std::uint64_t max_bft_demand = 0;  // highest height carrying a BFT-model command
    std::vector<Command> pending;
    std::set<std::pair<std::uint32_t, std::uint64_t>> pending_index;
    std::set<std::pair<std::uint32_t, std::uint64_t>> batched;
  };

  // Subclass policy points.
  virtual void dispatch_command(const Command& cmd) = 0;
  virtual void on_lane_committed(CommitModel model, LaneState& lane, std::uint64_t height,
                                 Effects& e) = 0;
  /// Extra reason for the primary to propose an (empty) block in this lane.
  virtual bool lane_needs_catchup(const LaneState& lane) const { return false; }

  bool is_primary() const { return primary_of(view_, cfg_.base.params.n) == cfg_.base.id.index; }

  std::uint64_t timeout_ms() const {
    return cfg_.base.base_timeout_ms << std::min<std::uint32_t>(consecutive_vcs_, 6);
  }

  // --- client requests -------------------------------------------------------

  void on_client_request(const Command& cmd, Effects& e) {
    bool replied = false;
    for (CommitModel m : {CommitModel::kHybrid, CommitModel::kBft}) {
      auto it = reply_cache_.find({cmd.client, m});
      if (it != reply_cache_.end() && it->second.sequence == cmd.sequence && cmd.wants(m)) {
        e.send(cmd.client, it->second);
        replied = true;
      }
    }
    if (replied) return;
    if (hybrid_ledger_.last_executed.count(cmd.client) &&
        hybrid_ledger_.last_executed.at(cmd.client) >= cmd.sequence)
      return;  // already on the chain; outstanding commits will answer
    dispatch_command(cmd);
    if (phase_ != Phase::kNormal) return;
    if (is_primary()) {
      try_propose_all(e);
    } else {
      e.send(primary_of(view_, cfg_.base.params.n), ClientRequestMsg{cmd});
      arm_progress_if_idle(e);
    }
  }

  void lane_enqueue(LaneState& lane, const Command& cmd) {
    auto key = std::make_pair(cmd.client, cmd.sequence);
    if (lane.pending_index.count(key)) return;
    lane.pending_index.insert(key);
    lane.pending.push_back(cmd);
  }

  // --- proposing -------------------------------------------------------------

  void try_propose_all(Effects& e) {
    if (!is_primary() || phase_ != Phase::kNormal) return;
    for (auto& lane : lanes_) try_propose(lane, e);
  }

  void try_propose(LaneState& lane, Effects& e) {
    if (!is_primary() || phase_ != Phase::kNormal) return;
    while (true) {
      if (!pacing_satisfied(lane)) return;
      std::vector<Command> batch = next_batch(lane);
      bool flush = batch.empty() && flush_needed(lane);
      bool catchup = batch.empty() && !flush && lane_needs_catchup(lane);
      if (batch.empty() && !flush && !catchup) return;
      propose_block(lane, std::move(batch), e);
    }
  }

  bool pacing_satisfied(const LaneState& lane) const {
    if (lane.last_proposed == 0) return true;
    auto dit = lane.chain_digest.find(lane.last_proposed);
    if (dit == lane.chain_digest.end()) return false;
    auto hit = lane.certs.find(lane.last_proposed);
    if (hit == lane.certs.end()) return false;
    auto cit = hit->second.find(dit->second);
    if (cit == hit->second.end()) return false;
    if (cfg_.pacing == Pacing::kBftQc) return cit->second.bft.has_value();
    return cit->second.hybrid.has_value() || cit->second.bft.has_value();
  }

  std::vector<Command> next_batch(LaneState& lane) {
    std::vector<Command> batch;
    for (const Command& cmd : lane.pending) {
      if (lane.batched.count({cmd.client, cmd.sequence})) continue;
      batch.push_back(cmd);
      if (batch.size() == cfg_.base.batch_size) break;
    }
    for (const Command& cmd : batch) lane.batched.insert({cmd.client, cmd.sequence});
    return batch;
  }

  /// The tip carries a command that needs the BFT rule, which only fires
  /// once a successor block is certified; propose an empty successor so the
  /// two-chain evidence can form.
  bool flush_needed(const LaneState& lane) const {
    if (!lane.tip || lane.tip != lane.last_proposed) return false;
    if (lane.bft_frontier >= lane.max_bft_demand) return false;
    return lane.max_bft_demand == lane.tip;
  }

  void propose_block(LaneState& lane, std::vector<Command> batch, Effects& e) {
    Block block;
    block.height = lane.last_proposed + 1;
    block.instance = lane.instance;
    block.commands = std::move(batch);
    if (block.height > 1) block.parent_digest = lane.chain_digest.at(block.height - 1);

    const NodeFault& fault = cfg_.base.fault;
    bool equivocate = (fault.behavior == NodeBehavior::kEquivocate ||
                       fault.behavior == NodeBehavior::kCompromisedEquivocate) &&
                      block.height == fault.equivocate_height && lane.instance == 0 &&
                      !equivocated_;

    Digest dig = block_digest(block);
    UsigCertificate ui =
        usig_.create_ui(vote_core(view_, lane.instance, block.height, dig));
    accept_block(lane, block, dig, ui);
    ++proposals_sent_;
    ProposeMsg propose{view_, cfg_.base.id.index, block, ui};

    if (!equivocate) {
      broadcast_buffered(propose, view_, e);
    } else {
      equivocated_ = true;
      emit_equivocation(lane, propose, dig, e);
    }
    arm_progress_if_idle(e);
  }

  void emit_equivocation(LaneState& lane, const ProposeMsg& propose, const Digest& dig,
                         Effects& e) {
    Block fork = propose.block;
    Command marker;
    marker.client = 0xdeadbeef;
    marker.sequence = 1;
    marker.payload = {0xff};
    fork.commands.push_back(marker);
    Digest fork_dig = block_digest(fork);

    std::vector<std::uint32_t> others;
    for (std::uint32_t r = 0; r < cfg_.base.params.n; ++r)
      if (r != cfg_.base.id.index) others.push_back(r);
    std::size_t split = (others.size() + 1) / 2;

    ProposeMsg forked = propose;
    forked.block = fork;
    if (cfg_.base.fault.behavior == NodeBehavior::kCompromisedEquivocate) {
      // Reused counter, valid signature: only a broken trusted component
      // can produce this.
      forked.ui = usig_.create_ui_with_counter(
          propose.ui.counter, vote_core(view_, lane.instance, fork.height, fork_dig));
    }
    // Otherwise the attestation still covers the original block and fails
    // verification against the forked one.

    for (std::size_t i = 0; i < others.size(); ++i)
      e.send(others[i], i < split ? ProtocolMessage{propose} : ProtocolMessage{forked});
    retransmit_.push_back({view_, propose});

    if (cfg_.base.fault.behavior == NodeBehavior::kCompromisedEquivocate) {
      // Hand the fork one extra endorsement so an honest voter on that side
      // can assemble an f+1 certificate.
      UsigCertificate vote_ui =
          usig_.create_ui(vote_core(view_, lane.instance, fork.height, fork_dig));
      VoteMsg vote{view_,   cfg_.base.id.index, lane.instance, fork.height,
                   fork_dig, forked.ui,          vote_ui};
      for (std::size_t i = split; i < others.size(); ++i) e.send(others[i], vote);
    }
  }

  void accept_block(LaneState& lane, const Block& block, const Digest& dig,
                    const UsigCertificate& proposer_ui) {
    lane.chain[block.height] = block;
    lane.chain_digest[block.height] = dig;
    lane.tip = std::max(lane.tip, block.height);
    if (is_primary()) lane.last_proposed = std::max(lane.last_proposed, block.height);
    VoteEntry endorse;
    endorse.view = view_;
    endorse.instance = lane.instance;
    endorse.height = block.height;
    endorse.block_digest = dig;
    endorse.ui = proposer_ui;
    lane.propose_endorsement[block.height] = endorse;
    for (const Command& cmd : block.commands)
      if (cmd.response_model != ResponseModel::kHybrid)
        lane.max_bft_demand = std::max(lane.max_bft_demand, block.height);
  }

  // --- propose handling ------------------------------------------------------

  void on_propose(const ProposeMsg& m, Effects& e) {
    if (!route_view(m.view, ProtocolMessage{m}, e)) return;
    if (m.sender != primary_of(view_, cfg_.base.params.n) || m.sender == cfg_.base.id.index)
      return;
    if (m.block.instance >= lanes_.size()) return;
    Digest dig = block_digest(m.block);
    if (!cache_->verify_ui(keys_, vote_core(m.view, m.block.instance, m.block.height, dig),
                           m.ui)) {
      e.record_event("drop bad_propose_ui");
      return;
    }
    // The primary's attested stream is consumed strictly in counter order.
    if (m.ui.counter < next_propose_counter_) {
      auto it = consumed_proposes_.find(m.ui.counter);
      if (it != consumed_proposes_.end() && it->second != dig) {
        e.record_event("evidence reused_counter " + std::to_string(m.ui.counter));
        request_view_change(view_ + 1, e);
      }
      return;
    }
    if (m.ui.counter > next_propose_counter_) {
      future_proposes_.emplace(m.ui.counter, m);
      return;
    }
    consume_propose(m, dig, e);
    while (true) {
      auto it = future_proposes_.find(next_propose_counter_);
      if (it == future_proposes_.end()) break;
      ProposeMsg next = it->second;
      future_proposes_.erase(it);
      consume_propose(next, block_digest(next.block), e);
    }
  }

  void consume_propose(const ProposeMsg& m, const Digest& dig, Effects& e) {
    consumed_proposes_[m.ui.counter] = dig;
    ++next_propose_counter_;
    process_block(m, dig, e);
  }

  void process_block(const ProposeMsg& m, const Digest& dig, Effects& e) {
    LaneState& lane = lanes_[m.block.instance];
    std::uint64_t h = m.block.height;
    if (h <= lane.tip) {
      if (lane.chain_digest.count(h) && lane.chain_digest[h] != dig) {
        e.record_event("evidence equivocating_propose " + std::to_string(h));
        request_view_change(view_ + 1, e);
      }
      return;
    }
    if (h > lane.tip + 1) {
      lane.future_blocks.emplace(h, m);
      return;
    }
    bool extends = (h == 1) ? !m.block.parent_digest.has_value()
                            : (m.block.parent_digest.has_value() &&
                               *m.block.parent_digest == lane.chain_digest.at(h - 1));
    if (!extends) {
      e.record_event("evidence parent_mismatch " + std::to_string(h));
      request_view_change(view_ + 1, e);
      return;
    }
    accept_block(lane, m.block, dig, m.ui);
    vote_on(lane, h, dig, m.ui, e);
    form_certs(lane, h, dig, e);
    try_commit(lane, e);
    arm_progress_if_idle(e);

    // A buffered successor can be processed now.
    auto it = lane.future_blocks.find(lane.tip + 1);
    if (it != lane.future_blocks.end()) {
      ProposeMsg next = it->second;
      lane.future_blocks.erase(it);
      process_block(next, block_digest(next.block), e);
    }
  }

  void vote_on(LaneState& lane, std::uint64_t h, const Digest& dig,
               const UsigCertificate& proposer_ui, Effects& e) {
    if (lane.voted.count(h)) return;
    lane.voted[h] = dig;
    UsigCertificate voter_ui = usig_.create_ui(vote_core(view_, lane.instance, h, dig));
    VoteEntry own;
    own.view = view_;
    own.instance = lane.instance;
    own.height = h;
    own.block_digest = dig;
    own.ui = voter_ui;
    lane.votes[h][dig][cfg_.base.id.index] = own;

    VoteMsg vote{view_, cfg_.base.id.index, lane.instance, h, dig, proposer_ui, voter_ui};
    if (cfg_.comm == CommPattern::kQuadratic)
      broadcast_buffered(vote, view_, e);
    else
      send_buffered(primary_of(view_, cfg_.base.params.n), vote, view_, e);
  }

  // --- votes and certificates -------------------------------------------------

  void on_vote(const VoteMsg& m, Effects& e) {
    if (!route_view(m.view, ProtocolMessage{m}, e)) return;
    if (m.sender == cfg_.base.id.index || m.instance >= lanes_.size()) return;
    // Linear pattern: only the primary aggregates raw votes.
    if (cfg_.comm == CommPattern::kLinear && !is_primary()) return;
    Bytes core = vote_core(m.view, m.instance, m.height, m.block_digest);
    if (!cache_->verify_ui(keys_, core, m.voter_ui) || m.voter_ui.replica.index != m.sender) {
      e.record_event("drop bad_vote_ui");
      return;
    }
    LaneState& lane = lanes_[m.instance];
    auto& at_height = lane.votes[m.height];
    for (const auto& [dig, voters] : at_height) {
      if (dig != m.block_digest && voters.count(m.sender)) {
        e.record_event("evidence conflicting_vote " + std::to_string(m.sender));
        request_view_change(view_ + 1, e);
        break;
      }
    }
    auto& voters = at_height[m.block_digest];
    if (voters.count(m.sender)) return;
    VoteEntry entry;
    entry.view = m.view;
    entry.instance = m.instance;
    entry.height = m.height;
    entry.block_digest = m.block_digest;
    entry.ui = m.voter_ui;
    voters[m.sender] = entry;

    form_certs(lane, m.height, m.block_digest, e);
    try_commit(lane, e);
  }

  void form_certs(LaneState& lane, std::uint64_t h, const Digest& dig, Effects& e) {
    CertPair& cp = lane.certs[h][dig];
    auto vit = lane.votes.find(h);
    if (vit == lane.votes.end()) return;
    auto dit = vit->second.find(dig);
    std::vector<VoteEntry> vote_entries;
    if (dit != vit->second.end())
      for (const auto& [voter, entry] : dit->second) vote_entries.push_back(entry);

    if (!cp.hybrid && !vote_entries.empty()) {
      auto qc = try_assemble(vote_entries, QcFlavor::kHybrid, cfg_.base.params, keys_, *cache_);
      if (qc) {
        cp.hybrid = std::move(qc);
        on_new_cert(lane, *cp.hybrid, e);
      }
    }
    if (!cp.bft) {
      std::vector<VoteEntry> with_proposer = vote_entries;
      auto pit = lane.propose_endorsement.find(h);
      if (pit != lane.propose_endorsement.end() && pit->second.block_digest == dig)
        with_proposer.push_back(pit->second);
      if (!with_proposer.empty()) {
        auto qc = try_assemble(with_proposer, QcFlavor::kBft, cfg_.base.params, keys_, *cache_);
        if (qc) {
          cp.bft = std::move(qc);
          on_new_cert(lane, *cp.bft, e);
        }
      }
    }
  }

  void on_new_cert(LaneState& lane, const QuorumCertificate& qc, Effects& e) {
    // Certificates are gossiped so the view-change quorum holds what any
    // committing replica held; in the linear pattern this is also the only
    // way non-primaries learn quorums formed.
    if (cfg_.comm == CommPattern::kQuadratic || is_primary())
      broadcast_buffered(CertBroadcastMsg{view_, cfg_.base.id.index, qc}, view_, e);
    if (is_primary()) try_propose(lane, e);
  }

  void on_cert(const CertBroadcastMsg& m, Effects& e) {
    if (m.cert.instance >= lanes_.size()) return;
    if (m.view > view_) {
      deferred_.push_back(ProtocolMessage{m});
      return;
    }
    LaneState& lane = lanes_[m.cert.instance];
    CertPair& cp = lane.certs[m.cert.height][m.cert.block_digest];
    auto& slot = m.cert.flavor == QcFlavor::kHybrid ? cp.hybrid : cp.bft;
    if (slot) return;
    if (!validate_certificate(m.cert, cfg_.base.params, keys_, *cache_)) {
      e.record_event("drop bad_cert");
      return;
    }
    slot = m.cert;
    // Received certificates are applied, not re-gossiped; the assembler's
    // own broadcast plus retransmission already spreads them.
    if (is_primary()) try_propose(lane, e);
    try_commit(lane, e);
  }

  // --- commit rules ------------------------------------------------------------

  void try_commit(LaneState& lane, Effects& e) {
    bool progressed = false;
    while (true) {
      std::uint64_t h = lane.hybrid_frontier + 1;
      auto bit = lane.chain.find(h);
      if (bit == lane.chain.end()) break;
      const Digest& dig = lane.chain_digest.at(h);
      auto hit = lane.certs.find(h);
      if (hit == lane.certs.end()) break;
      auto cit = hit->second.find(dig);
      if (cit == hit->second.end() || !cit->second.hybrid) break;
      lane.hybrid_frontier = h;
      e.record_commit(CommitModel::kHybrid, lane.instance, h, dig);
      on_lane_committed(CommitModel::kHybrid, lane, h, e);
      progressed = true;
    }
    while (true) {
      std::uint64_t h = lane.bft_frontier + 1;
      auto b0 = lane.chain.find(h);
      auto b1 = lane.chain.find(h + 1);
      if (b0 == lane.chain.end() || b1 == lane.chain.end()) break;
      const Digest& d0 = lane.chain_digest.at(h);
      const Digest& d1 = lane.chain_digest.at(h + 1);
      if (!b1->second.parent_digest || *b1->second.parent_digest != d0) break;
      if (!has_bft_cert(lane, h, d0) || !has_bft_cert(lane, h + 1, d1)) break;
      lane.bft_frontier = h;
      e.record_commit(CommitModel::kBft, lane.instance, h, d0);
      on_lane_committed(CommitModel::kBft, lane, h, e);
      progressed = true;
    }
    if (progressed) {
      consecutive_vcs_ = 0;
      cancel_progress();
      if (work_pending()) arm_progress(e);
      prune_retransmits();
      if (is_primary()) try_propose_all(e);
    }
  }

  bool has_bft_cert(const LaneState& lane, std::uint64_t h, const Digest& dig) const {
    auto hit = lane.certs.find(h);
    if (hit == lane.certs.end()) return false;
    auto cit = hit->second.find(dig);
    return cit != hit->second.end() && cit->second.bft.has_value();
  }

  /// Shared by both execution policies: apply a committed block to the
  /// model's ledger and answer the clients that asked for this model.
  void execute_block(CommitModel model, LaneState& lane, std::uint64_t height, Effects& e) {
    ExecLedger& ledger = model == CommitModel::kHybrid ? hybrid_ledger_ : bft_ledger_;
    const Block& block = lane.chain.at(height);
    std::size_t applied = 0;
    for (const Command& cmd : block.commands) {
      if (!ledger.apply(cmd)) continue;
      ++applied;
      if (model == CommitModel::kHybrid)

        drop_pending(lane, cmd.client, cmd.sequence);
      if (cmd.wants(model)) {
        ClientReplyMsg reply{cfg_.base.id.index, cmd.client, cmd.sequence, model, ledger.state};
        reply_cache_[{cmd.client, model}] = reply;
        e.send(cmd.client, reply);
      }
    }
    e.record_exec(model, lane.instance, height, applied);
  }

  void drop_pending(LaneState& lane, std::uint32_t client, std::uint64_t sequence) {
    for (auto it = lane.pending.begin(); it != lane.pending.end();) {
      if (it->client == client && it->sequence <= sequence) {
        lane.pending_index.erase({it->client, it->sequence});
        it = lane.pending.erase(it);
      } else {
        ++it;
      }
    }
  }

  // --- view change -------------------------------------------------------------

  void on_req_view_change(const ReqViewChangeMsg& m, Effects& e) {
    if (m.new_view <= view_ || m.sender == cfg_.base.id.index) return;
    reqvc_others_[m.new_view].insert(m.sender);
    maybe_enter_view_change(m.new_view, e);
  }

  void request_view_change(std::uint64_t new_view, Effects& e) {
    if (new_view <= view_) return;
    if (self_reqvc_.count(new_view)) return;
    self_reqvc_.insert(new_view);
    broadcast_buffered(ReqViewChangeMsg{cfg_.base.id.index, view_, new_view}, new_view, e);
    maybe_enter_view_change(new_view, e);
    if (phase_ == Phase::kNormal) arm_progress(e);
  }

  void maybe_enter_view_change(std::uint64_t new_view, Effects& e) {
    std::size_t count = reqvc_others_[new_view].size() + (self_reqvc_.count(new_view) ? 1 : 0);
    if (count >= cfg_.base.params.req_view_change) enter_view_change(new_view, e);
  }

  void enter_view_change(std::uint64_t new_view, Effects& e) {
    if (phase_ == Phase::kViewChange && pending_view_ >= new_view) return;
    if (new_view <= view_) return;
    phase_ = Phase::kViewChange;
    pending_view_ = new_view;
    ++consecutive_vcs_;
    std::size_t count = reqvc_others_[new_view].size() + (self_reqvc_.count(new_view) ? 1 : 0);
    e.record_event("vc_enter " + std::to_string(new_view) + " " + std::to_string(count));

    ViewChangeMsg vc;
    vc.sender = cfg_.base.id.index;
    vc.new_view = new_view;
    vc.certified = certified_blocks();
    vc.ui = usig_.create_ui(viewchange_core(vc));
    vcs_[new_view][cfg_.base.id.index] = vc;
    broadcast_buffered(vc, new_view, e);
    ++vc_wait_gen_;
    e.arm(TimerKind::kViewChangeWait, timeout_ms(), vc_wait_gen_);
    maybe_send_new_view(new_view, e);
  }

  std::vector<CertifiedBlock> certified_blocks() const {
    std::vector<CertifiedBlock> out;
    for (const auto& lane : lanes_) {
      for (const auto& [h, by_digest] : lane.certs) {
        for (const auto& [dig, cp] : by_digest) {
          if (!cp.hybrid && !cp.bft) continue;
          auto bit = lane.chain.find(h);
          if (bit == lane.chain.end() || lane.chain_digest.at(h) != dig) continue;
          CertifiedBlock cb;
          cb.block = bit->second;
          cb.hybrid = cp.hybrid;
          cb.bft = cp.bft;
          out.push_back(std::move(cb));
        }
      }
    }
    return out;
  }

  void on_view_change(const ViewChangeMsg& m, Effects& e) {
    if (m.new_view <= view_) return;
    auto& collected = vcs_[m.new_view];
    if (collected.count(m.sender)) return;
    if (!validate_view_change(m, e)) return;
    collected[m.sender] = m;
    if (phase_ == Phase::kNormal && collected.size() >= cfg_.base.params.req_view_change)
      enter_view_change(m.new_view, e);
    maybe_send_new_view(m.new_view, e);
  }

  bool validate_view_change(const ViewChangeMsg& m, Effects& e) {
    if (!cache_->verify_ui(keys_, viewchange_core(m), m.ui)) {
      e.record_event("vc_reject bad_ui " + std::to_string(m.sender));
      return false;
    }
    for (const auto& cb : m.certified) {
      Digest dig = block_digest(cb.block);
      for (const auto* qc : {&cb.hybrid, &cb.bft}) {
        if (!qc->has_value()) continue;
        const QuorumCertificate& cert = **qc;
        if (cert.block_digest != dig || cert.height != cb.block.height ||
            cert.instance != cb.block.instance ||
            !validate_certificate(cert, cfg_.base.params, keys_, *cache_)) {
          e.record_event("vc_reject bad_cert " + std::to_string(m.sender));
          return false;
        }
      }
      if (!cb.hybrid && !cb.bft) {
        e.record_event("vc_reject uncertified_entry " + std::to_string(m.sender));
        return false;
      }
    }
    return true;
  }

  void maybe_send_new_view(std::uint64_t new_view, Effects& e) {
    if (cfg_.base.id.index != primary_of(new_view, cfg_.base.params.n)) return;
    if (newview_sent_.count(new_view)) return;
    auto& collected = vcs_[new_view];
    if (collected.size() < cfg_.base.params.view_change) return;
    newview_sent_.insert(new_view);

    NewViewMsg nv;
    nv.sender = cfg_.base.id.index;
    nv.new_view = new_view;
    for (const auto& [sender, vc] : collected) nv.view_changes.push_back(vc);
    std::sort(nv.view_changes.begin(), nv.view_changes.end(),
              [](const ViewChangeMsg& a, const ViewChangeMsg& b) { return a.sender < b.sender; });
    nv.adopted_chain = compute_adopted_chain(nv.view_changes);
    nv.ui = usig_.create_ui(newview_core(nv));
    broadcast_buffered(nv, new_view, e);
    apply_new_view(nv, e);
  }

  /// Deterministic new-view chain selection: per lane, walk heights from
  /// genesis and keep the strongest certified, parent-linked candidate.
  /// BFT-certified candidates dominate; the hybrid-certified suffix past
  /// the BFT prefix survives.
  std::vector<CertifiedBlock> compute_adopted_chain(const std::vector<ViewChangeMsg>& vcs) const {
    struct Candidate {
      Block block;
      std::optional<QuorumCertificate> hybrid;
      std::optional<QuorumCertificate> bft;
      std::size_t voters = 0;
    };
    // (instance, height) -> digest -> candidate (certs merged across VCs)
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::map<Digest, Candidate>> cands;
    std::vector<ViewChangeMsg> sorted = vcs;
    std::sort(sorted.begin(), sorted.end(),
              [](const ViewChangeMsg& a, const ViewChangeMsg& b) { return a.sender < b.sender; });
    for (const auto& vc : sorted) {
      for (const auto& cb : vc.certified) {
        Digest dig = block_digest(cb.block);
        Candidate& c = cands[{cb.block.instance, cb.block.height}][dig];
        c.block = cb.block;
        if (cb.hybrid && !c.hybrid) c.hybrid = cb.hybrid;
        if (cb.bft && !c.bft) c.bft = cb.bft;
        std::size_t voters = std::max(cb.hybrid ? cb.hybrid->votes.size() : 0,
                                      cb.bft ? cb.bft->votes.size() : 0);
        c.voters = std::max(c.voters, voters);
      }
    }
    std::vector<CertifiedBlock> adopted;
    for (std::uint32_t inst = 0; inst < lanes_.size(); ++inst) {
      std::optional<Digest> parent;
      for (std::uint64_t h = 1;; ++h) {
        auto it = cands.find({inst, h});
        if (it == cands.end()) break;
        const Candidate* best = nullptr;
        Digest best_dig;
        for (const auto& [dig, cand] : it->second) {
          bool linked = (h == 1) ? !cand.block.parent_digest.has_value()
                                 : (parent && cand.block.parent_digest &&
                                    *cand.block.parent_digest == *parent);
          if (!linked) continue;
          if (!best) {
            best = &cand;
            best_dig = dig;
            continue;
          }
          auto rank = [](const Candidate& c) {
            return std::make_pair(c.bft.has_value() ? 1 : 0, c.voters);
          };
          if (rank(cand) > rank(*best) || (rank(cand) == rank(*best) && dig < best_dig)) {
            best = &cand;
            best_dig = dig;
          }
        }
        if (!best) break;
        CertifiedBlock cb;
        cb.block = best->block;
        cb.hybrid = best->hybrid;
        cb.bft = best->bft;
        adopted.push_back(std::move(cb));
        parent = best_dig;
      }
    }
    return adopted;
  }

  void on_new_view(const NewViewMsg& m, Effects& e) {
    if (m.new_view <= view_) return;
    if (m.sender != primary_of(m.new_view, cfg_.base.params.n)) return;
    if (!cache_->verify_ui(keys_, newview_core(m), m.ui)) return;
    std::set<std::uint32_t> senders;
    for (const auto& vc : m.view_changes) {
      if (vc.new_view != m.new_view || !validate_view_change(vc, e)) {
        e.record_event("nv_reject bad_vc " + std::to_string(m.sender));
        return;
      }
      senders.insert(vc.sender);
    }
    if (senders.size() < cfg_.base.params.view_change) {
      e.record_event("nv_reject short_quorum " + std::to_string(m.sender));
      return;
    }
    if (compute_adopted_chain(m.view_changes) != m.adopted_chain) {
      e.record_event("nv_reject mismatch " + std::to_string(m.sender));
      request_view_change(m.new_view + 1, e);
      return;
    }
    apply_new_view(m, e);
  }

  void apply_new_view(const NewViewMsg& nv, Effects& e) {
    view_ = nv.new_view;
    phase_ = Phase::kNormal;
    pending_view_ = 0;
    ++vc_wait_gen_;

    for (auto& lane : lanes_) {
      lane.chain.clear();
      lane.chain_digest.clear();
      lane.votes.clear();
      lane.propose_endorsement.clear();
      lane.certs.clear();
      lane.voted.clear();
      lane.future_blocks.clear();
      lane.batched.clear();
      lane.tip = 0;
      lane.max_bft_demand = 0;
    }
    for (const auto& cb : nv.adopted_chain) {
      if (cb.block.instance >= lanes_.size()) continue;
      LaneState& lane = lanes_[cb.block.instance];
      Digest dig = block_digest(cb.block);
      lane.chain[cb.block.height] = cb.block;
      lane.chain_digest[cb.block.height] = dig;
      lane.tip = std::max(lane.tip, cb.block.height);
      CertPair& cp = lane.certs[cb.block.height][dig];
      cp.hybrid = cb.hybrid;
      cp.bft = cb.bft;
      for (const Command& cmd : cb.block.commands)
        if (cmd.response_model != ResponseModel::kHybrid)
          lane.max_bft_demand = std::max(lane.max_bft_demand, cb.block.height);
    }
    for (auto& lane : lanes_) lane.last_proposed = lane.tip;

    next_propose_counter_ = nv.ui.counter + 1;
    future_proposes_.clear();
    consumed_proposes_.clear();
    for (auto it = retransmit_.begin(); it != retransmit_.end();)
      it = (it->tag_view < view_) ? retransmit_.erase(it) : std::next(it);
    for (auto it = reqvc_others_.begin(); it != reqvc_others_.end();)
      it = (it->first <= view_) ? reqvc_others_.erase(it) : std::next(it);
    for (auto it = vcs_.begin(); it != vcs_.end();)
      it = (it->first <= view_) ? vcs_.erase(it) : std::next(it);

    e.record_view(view_);
    for (auto& lane : lanes_) try_commit(lane, e);

    if (is_primary()) {
      try_propose_all(e);
    } else {
      for (auto& lane : lanes_)
        for (const Command& cmd : lane.pending)
          e.send(primary_of(view_, cfg_.base.params.n), ClientRequestMsg{cmd});
    }
    cancel_progress();
    if (work_pending()) arm_progress(e);

    auto deferred = std::move(deferred_);
    deferred_.clear();
    for (const auto& msg : deferred) handle(msg, e);
  }

  // --- plumbing ---------------------------------------------------------------

  bool route_view(std::uint64_t v, ProtocolMessage msg, Effects&) {
    if (v == view_ && phase_ == Phase::kNormal) return true;
    if (v > view_) deferred_.push_back(std::move(msg));
    return false;
  }

  struct Unacked {
    std::uint64_t tag_view;
    ProtocolMessage msg;
  };

  void broadcast_buffered(ProtocolMessage msg, std::uint64_t tag_view, Effects& e) {
    e.broadcast(msg);
    retransmit_.push_back({tag_view, std::move(msg)});
    arm_retransmit(e);
  }

  void send_buffered(NodeId dest, ProtocolMessage msg, std::uint64_t tag_view, Effects& e) {
    e.send(dest, msg);
    retransmit_targets_.push_back({dest, {tag_view, std::move(msg)}});
    arm_retransmit(e);
  }

  void arm_retransmit(Effects& e) {
    if (retransmit_armed_) return;
    retransmit_armed_ = true;
    e.arm(TimerKind::kRetransmit, cfg_.base.retransmit_ms, 0);
  }

  void retransmit(Effects& e) {
    for (const auto& u : retransmit_)
      if (u.tag_view >= view_) e.broadcast(u.msg);
    for (const auto& [dest, u] : retransmit_targets_)
      if (u.tag_view >= view_) e.send(dest, u.msg);
    if (work_pending() && (!retransmit_.empty() || !retransmit_targets_.empty())) {
      retransmit_armed_ = true;
      e.arm(TimerKind::kRetransmit, cfg_.base.retransmit_ms, 0);
    }
  }

  void prune_retransmits() {
    auto done = [&](const ProtocolMessage& msg) {
      std::uint32_t inst = 0;
      std::uint64_t height = 0;
      if (const auto* p = std::get_if<ProposeMsg>(&msg)) {
        inst = p->block.instance;
        height = p->block.height;
      } else if (const auto* v = std::get_if<VoteMsg>(&msg)) {
        inst = v->instance;
        height = v->height;
      } else if (const auto* c = std::get_if<CertBroadcastMsg>(&msg)) {
        inst = c->cert.instance;
        height = c->cert.height;
      } else {
        return false;
      }
      const LaneState& lane = lanes_[inst];
      return height <= lane.bft_frontier && height <= lane.hybrid_frontier;
    };
    std::erase_if(retransmit_, [&](const Unacked& u) { return done(u.msg); });
    std::erase_if(retransmit_targets_,
                  [&](const std::pair<NodeId, Unacked>& t) { return done(t.second.msg); });
  }

  void arm_progress(Effects& e) {
    ++progress_gen_;
    progress_armed_gen_ = progress_gen_;
    e.arm(TimerKind::kProgress, timeout_ms(), progress_gen_);
  }

  void cancel_progress() { ++progress_gen_; }

  void arm_progress_if_idle(Effects& e) {
    if (progress_armed_gen_ == progress_gen_) return;
    if (!work_pending() || phase_ != Phase::kNormal) return;
    arm_progress(e);
  }

  DuobftConfig cfg_;
  KeyDirectory keys_;
  VerifyCache* cache_ = nullptr;
  UsigInstance usig_;

  std::uint64_t view_ = 0;
  Phase phase_ = Phase::kNormal;
  std::uint64_t pending_view_ = 0;
  std::uint32_t consecutive_vcs_ = 0;

  std::vector<LaneState> lanes_;
  std::uint64_t next_propose_counter_ = 1;
  std::map<std::uint64_t, ProposeMsg> future_proposes_;
  std::map<std::uint64_t, Digest> consumed_proposes_;
  std::uint64_t proposals_sent_ = 0;
  bool equivocated_ = false;

  ExecLedger hybrid_ledger_;
  ExecLedger bft_ledger_;
  std::map<std::pair<std::uint32_t, CommitModel>, ClientReplyMsg> reply_cache_;

  std::map<std::uint64_t, std::set<std::uint32_t>> reqvc_others_;
  std::set<std::uint64_t> self_reqvc_;
  std::map<std::uint64_t, std::map<std::uint32_t, ViewChangeMsg>> vcs_;
  std::set<std::uint64_t> newview_sent_;
  std::vector<ProtocolMessage> deferred_;

  std::vector<Unacked> retransmit_;
  std::vector<std::pair<NodeId, Unacked>> retransmit_targets_;
  bool retransmit_armed_ = false;

  std::uint64_t progress_gen_ = 0;
  std::uint64_t progress_armed_gen_ = 0;
  std::uint64_t vc_wait_gen_ = 0;
};

/// Single-chain replica: one lane, blocks execute the moment they commit.
class DuobftReplica final : public DuobftReplicaBase {
 public:
  DuobftReplica() = default;
  DuobftReplica(DuobftConfig cfg, KeyDirectory keys, KeyPair usig_keypair, VerifyCache* cache)
      : DuobftReplicaBase(fix_instances(std::move(cfg)), std::move(keys), std::move(usig_keypair),
                          cache) {}

 private:
  static DuobftConfig fix_instances(DuobftConfig cfg) {
    cfg.instances = 1;
    return cfg;
  }

  void dispatch_command(const Command& cmd) override { lane_enqueue(lanes_[0], cmd); }

  void on_lane_committed(CommitModel model, LaneState& lane, std::uint64_t height,
                         Effects& e) override {
    execute_block(model, lane, height, e);
  }
};

}  // namespace duokit
