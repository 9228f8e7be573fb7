#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "duokit/replica_common.hpp"
#include "duokit/usig.hpp"

namespace duokit {

/// Flexible MinBFT replica: Prepare/Commit agreement with an f+1 commit
/// quorum and an n-f view-change quorum. Handlers are pure transitions
/// (state, event) -> (state', effects); the simulator owns time and
/// delivery. Copyable by design.
class MinbftReplica {
 public:
  MinbftReplica() = default;
  MinbftReplica(ReplicaConfig cfg, KeyDirectory keys, KeyPair usig_keypair, VerifyCache* cache)
      : cfg_(cfg),
        keys_(std::move(keys)),
        cache_(cache),
        usig_(cfg.id, std::move(usig_keypair),
              cfg.fault.compromises_usig() ? UsigMode::kCompromised : UsigMode::kHonest) {}

  std::uint64_t view() const { return view_; }
  bool in_view_change() const { return phase_ == Phase::kViewChange; }
  ReplicaId id() const { return cfg_.id; }
  std::uint64_t proposals_sent() const { return prepares_sent_; }
  const ExecLedger& ledger() const { return ledger_; }
  std::uint64_t executed_count() const { return exec_index_; }

  bool work_pending() const {
    if (phase_ == Phase::kViewChange) return true;
    if (!pending_.empty()) return true;
    for (const auto& [c, slot] : slots_)
      if (!slot.executed) return true;
    return false;
  }

  void handle(const ProtocolMessage& msg, Effects& e) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ClientRequestMsg>) on_client_request(m.command, e);
          else if constexpr (std::is_same_v<T, PrepareMsg>) on_prepare(m, e);
          else if constexpr (std::is_same_v<T, CommitMsg>) on_commit(m, e);
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

  // --- normal path ----------------------------------------------------------

  void on_client_request(const Command& cmd, Effects& e) {
    auto key = std::make_pair(cmd.client, cmd.sequence);
    auto cached = reply_cache_.find(cmd.client);
    if (cached != reply_cache_.end() && cached->second.sequence == cmd.sequence) {
      e.send(cmd.client, cached->second);  // duplicate of an executed command
      return;
    }
    if (ledger_.last_executed.count(cmd.client) &&
        ledger_.last_executed.at(cmd.client) >= cmd.sequence)
      return;  // stale duplicate
    if (!pending_index_.count(key)) {
      pending_index_.insert(key);
      pending_.push_back(cmd);
    }
    if (phase_ != Phase::kNormal) return;
    if (is_primary()) {
      cut_batches(e);
    } else {
      e.send(primary_of(view_, cfg_.params.n), ClientRequestMsg{cmd});
      arm_progress_if_idle(e);
    }
  }

  void on_prepare(const PrepareMsg& m, Effects& e) {
    if (!route_view(m.view, ProtocolMessage{m}, e)) return;
    if (m.sender != primary_of(view_, cfg_.params.n) || m.sender == cfg_.id.index) return;
    Digest bd = batch_digest(m.batch);
    if (!cache_->verify_ui(keys_, prepare_core(m.view, bd), m.ui)) {
      e.record_event("drop bad_prepare_ui " + std::to_string(m.sender));
      return;
    }
    accept_slot(m.ui.counter, m.batch, m.ui, e);
    advance_commits(e);
    try_execute(e);
    arm_progress_if_idle(e);
  }

  void on_commit(const CommitMsg& m, Effects& e) {
    if (!route_view(m.view, ProtocolMessage{m}, e)) return;
    if (m.sender == cfg_.id.index) return;
    if (m.primary != primary_of(view_, cfg_.params.n)) return;
    Digest bd = batch_digest(m.batch);
    if (!cache_->verify_ui(keys_, prepare_core(m.view, bd), m.primary_ui)) return;
    if (!cache_->verify_ui(keys_, commit_core(m.view, m.primary, m.primary_ui.counter, bd), m.ui)) {
      e.record_event("drop bad_commit_ui " + std::to_string(m.sender));
      return;
    }
    Slot* slot = accept_slot(m.primary_ui.counter, m.batch, m.primary_ui, e);
    if (!slot) return;
    slot->endorsers.insert(m.sender);
    advance_commits(e);
    try_execute(e);
  }

  // --- view change ----------------------------------------------------------

  void on_req_view_change(const ReqViewChangeMsg& m, Effects& e) {
    if (m.new_view <= view_ || m.sender == cfg_.id.index) return;
    reqvc_others_[m.new_view].insert(m.sender);
    maybe_enter_view_change(m.new_view, e);
  }

  void on_view_change(const ViewChangeMsg& m, Effects& e) {
    if (m.new_view <= view_) return;
    auto& collected = vcs_[m.new_view];
    if (collected.count(m.sender)) return;
    if (!validate_view_change(m, e)) return;
    collected[m.sender] = m;
    // Seeing a view-change quorum forming is itself reason to join.
    if (phase_ == Phase::kNormal && collected.size() >= cfg_.params.req_view_change)
      enter_view_change(m.new_view, e);
    if (cfg_.id.index == primary_of(m.new_view, cfg_.params.n) &&
        collected.size() >= cfg_.params.view_change && !newview_sent_.count(m.new_view))
      send_new_view(m.new_view, e);
  }

  void on_new_view(const NewViewMsg& m, Effects& e) {
    if (m.new_view <= view_) return;
    if (m.sender != primary_of(m.new_view, cfg_.params.n)) return;
    if (!cache_->verify_ui(keys_, newview_core(m), m.ui)) return;
    std::set<std::uint32_t> senders;
    for (const auto& vc : m.view_changes) {
      if (vc.new_view != m.new_view || !validate_view_change(vc, e)) {
        e.record_event("nv_reject bad_vc " + std::to_string(m.sender));
        return;
      }
      senders.insert(vc.sender);
    }
    if (senders.size() < cfg_.params.view_change) {
      e.record_event("nv_reject short_quorum " + std::to_string(m.sender));
      return;
    }
    auto adopted = compute_adopted(m.view_changes);
    if (adopted != m.adopted_log) {
      e.record_event("nv_reject mismatch " + std::to_string(m.sender));
      request_view_change(m.new_view + 1, e);
      return;
    }
    apply_new_view(m, e);
  }

 private:
  enum class Phase : std::uint8_t { kNormal, kViewChange };

  struct Slot {
    std::vector<Command> batch;
    UsigCertificate primary_ui;
    std::set<std::uint32_t> endorsers;  // prepare counts as the primary's
    bool commit_sent = false;
    bool executed = false;
  };

  bool is_primary() const { return primary_of(view_, cfg_.params.n) == cfg_.id.index; }

  std::uint64_t timeout_ms() const {
    return cfg_.base_timeout_ms << std::min<std::uint32_t>(consecutive_vcs_, 6);
  }

  /// view routing: true when the message belongs to the current view and
  /// normal phase; future-view messages are parked for replay.
  bool route_view(std::uint64_t v, ProtocolMessage msg, Effects&) {
    if (v == view_ && phase_ == Phase::kNormal) return true;
    if (v > view_) deferred_.push_back(std::move(msg));
    return false;
  }

  Slot* accept_slot(std::uint64_t counter, const std::vector<Command>& batch,
                    const UsigCertificate& primary_ui, Effects& e) {
    if (counter < base_counter_) return nullptr;
    auto it = slots_.find(counter);
    if (it != slots_.end()) {
      if (it->second.primary_ui.message_digest != primary_ui.message_digest) {
        e.record_event("evidence conflicting_prepare " + std::to_string(counter));
        request_view_change(view_ + 1, e);
        return nullptr;
      }
      return &it->second;
    }
    Slot slot;
    slot.batch = batch;
    slot.primary_ui = primary_ui;
    slot.endorsers.insert(primary_ui.replica.index);
    auto [ins, _] = slots_.emplace(counter, std::move(slot));
    return &ins->second;
  }

  /// Own Commit messages go out strictly in the primary's counter order, so
  /// a prepare that skips ahead sits buffered until the gap fills.
  void advance_commits(Effects& e) {
    while (true) {
      auto it = slots_.find(next_commit_counter_);
      if (it == slots_.end()) break;
      Slot& slot = it->second;
      if (!slot.commit_sent && !is_primary()) {
        Digest bd = batch_digest(slot.batch);
        std::uint32_t primary = primary_of(view_, cfg_.params.n);
        UsigCertificate ui =
            usig_.create_ui(commit_core(view_, primary, next_commit_counter_, bd));
        MinbftLogEntry entry;
        entry.kind = LogEntryKind::kCommit;
        entry.view = view_;
        entry.batch = slot.batch;
        entry.primary = primary;
        entry.primary_ui = slot.primary_ui;
        entry.ui = ui;
        own_log_.push_back(entry);
        CommitMsg cm{view_, cfg_.id.index, primary, slot.batch, slot.primary_ui, ui};
        broadcast_buffered(cm, view_, e);
      }
      slot.commit_sent = true;
      ++next_commit_counter_;
    }
  }

  void try_execute(Effects& e) {
    bool progressed = false;
    while (true) {
      auto it = slots_.find(next_exec_counter_);
      if (it == slots_.end()) break;
      Slot& slot = it->second;
      if (slot.endorsers.size() < cfg_.params.commit_hybrid) break;
      if (!slot.executed) execute_batch(view_, next_exec_counter_, slot.batch, e);
      slot.executed = true;
      ++next_exec_counter_;
      progressed = true;
    }
    if (progressed) {
      consecutive_vcs_ = 0;
      cancel_progress();
      if (work_pending()) arm_progress(e);
      prune_retransmits();
    }
  }

  void execute_batch(std::uint64_t in_view, std::uint64_t counter,
                     const std::vector<Command>& batch, Effects& e) {
    executed_marks_.insert({in_view, counter});
    ++exec_index_;
    Digest bd = batch_digest(batch);
    e.record_commit(CommitModel::kHybrid, 0, exec_index_, bd);
    std::size_t applied = 0;
    for (const Command& cmd : batch) {
      if (!ledger_.apply(cmd)) continue;
      ++applied;
      drop_pending(cmd.client, cmd.sequence);
      if (cmd.wants(CommitModel::kHybrid)) {
        ClientReplyMsg reply{cfg_.id.index, cmd.client, cmd.sequence, CommitModel::kHybrid,
                             ledger_.state};
        reply_cache_[cmd.client] = reply;
        e.send(cmd.client, reply);
      }
    }
    e.record_exec(CommitModel::kHybrid, 0, exec_index_, applied);
  }

  void drop_pending(std::uint32_t client, std::uint64_t sequence) {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->client == client && it->sequence <= sequence) {
        pending_index_.erase({it->client, it->sequence});
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void cut_batches(Effects& e) {
    std::vector<Command> batch;
    for (const Command& cmd : pending_) {
      if (batched_.count({cmd.client, cmd.sequence})) continue;
      batch.push_back(cmd);
      if (batch.size() == cfg_.batch_size) {
        send_prepare(batch, e);
        batch.clear();
      }
    }
    if (!batch.empty()) send_prepare(batch, e);
  }

  void send_prepare(const std::vector<Command>& batch, Effects& e) {
    for (const Command& cmd : batch) batched_.insert({cmd.client, cmd.sequence});
    UsigCertificate ui = usig_.create_ui(prepare_core(view_, batch_digest(batch)));
    MinbftLogEntry entry;
    entry.kind = LogEntryKind::kPrepare;
    entry.view = view_;
    entry.batch = batch;
    entry.ui = ui;
    own_log_.push_back(entry);
    Slot slot;
    slot.batch = batch;
    slot.primary_ui = ui;
    // A replica's own attestation never counts toward its own quorum.
    slots_.emplace(ui.counter, std::move(slot));
    ++prepares_sent_;
    broadcast_buffered(PrepareMsg{view_, cfg_.id.index, batch, ui}, view_, e);
    advance_commits(e);
    arm_progress_if_idle(e);

    if (cfg_.fault.behavior == NodeBehavior::kReproposeDuplicate && !reproposed_ &&
        prepares_sent_ == 1) {
      // Faulty primary assigns the same operations a second, fresh UI.
      reproposed_ = true;
      UsigCertificate dup = usig_.create_ui(prepare_core(view_, batch_digest(batch)));
      MinbftLogEntry dup_entry = entry;
      dup_entry.ui = dup;
      own_log_.push_back(dup_entry);
      Slot dup_slot;
      dup_slot.batch = batch;
      dup_slot.primary_ui = dup;
      slots_.emplace(dup.counter, std::move(dup_slot));
      ++prepares_sent_;
      broadcast_buffered(PrepareMsg{view_, cfg_.id.index, batch, dup}, view_, e);
      advance_commits(e);
    }
  }

  // --- view change helpers --------------------------------------------------

  void request_view_change(std::uint64_t new_view, Effects& e) {
    if (new_view <= view_) return;
    if (self_reqvc_.count(new_view)) return;
    self_reqvc_.insert(new_view);
    broadcast_buffered(ReqViewChangeMsg{cfg_.id.index, view_, new_view}, new_view, e);
    maybe_enter_view_change(new_view, e);
    // Re-arm so an ignored request eventually escalates.
    if (phase_ == Phase::kNormal) arm_progress(e);
  }

  void maybe_enter_view_change(std::uint64_t new_view, Effects& e) {
    std::size_t count = reqvc_others_[new_view].size() + (self_reqvc_.count(new_view) ? 1 : 0);
    if (count >= cfg_.params.req_view_change) enter_view_change(new_view, e);
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
    vc.sender = cfg_.id.index;
    vc.new_view = new_view;
    vc.log = own_log_;
    if (cfg_.fault.behavior == NodeBehavior::kTruncateViewChangeLog && vc.log.size() >= 2)
      vc.log.pop_back();  // omits the tail of the log, leaving a counter hole
    vc.ui = usig_.create_ui(viewchange_core(vc));

    MinbftLogEntry marker;
    marker.kind = LogEntryKind::kViewChange;
    marker.view = new_view;
    marker.ui = vc.ui;
    own_log_.push_back(marker);

    vcs_[new_view][cfg_.id.index] = vc;
    broadcast_buffered(vc, new_view, e);
    ++vc_wait_gen_;
    e.arm(TimerKind::kViewChangeWait, timeout_ms(), vc_wait_gen_);

    if (cfg_.id.index == primary_of(new_view, cfg_.params.n) &&
        vcs_[new_view].size() >= cfg_.params.view_change && !newview_sent_.count(new_view))
      send_new_view(new_view, e);
  }

  bool validate_view_change(const ViewChangeMsg& m, Effects& e) {
    if (!cache_->verify_ui(keys_, viewchange_core(m), m.ui)) {
      e.record_event("vc_reject bad_ui " + std::to_string(m.sender));
      return false;
    }
    // The sender's own log must tile counters 1..k with the view-change
    // attestation at k+1; a missing suffix or interior hole is visible here.
    std::uint64_t expect = 1;
    for (const auto& entry : m.log) {
      if (entry.ui.replica.index != m.sender || entry.ui.counter != expect) {
        e.record_event("vc_reject hole " + std::to_string(m.sender));
        return false;
      }
      if (!validate_log_entry(entry)) {
        e.record_event("vc_reject bad_entry " + std::to_string(m.sender));
        return false;
      }
      ++expect;
    }
    if (m.ui.counter != expect) {
      e.record_event("vc_reject hole " + std::to_string(m.sender));
      return false;
    }
    return true;
  }

  bool validate_log_entry(const MinbftLogEntry& entry) {
    switch (entry.kind) {
      case LogEntryKind::kPrepare:
        return cache_->verify_ui(keys_, prepare_core(entry.view, batch_digest(entry.batch)),
                                 entry.ui);
      case LogEntryKind::kCommit: {
        Digest bd = batch_digest(entry.batch);
        if (entry.primary_ui.replica.index != entry.primary) return false;
        if (!cache_->verify_ui(keys_, prepare_core(entry.view, bd), entry.primary_ui))
          return false;
        return cache_->verify_ui(
            keys_, commit_core(entry.view, entry.primary, entry.primary_ui.counter, bd), entry.ui);
      }
      case LogEntryKind::kViewChange:
      case LogEntryKind::kNewView:
        return cache_->verify_attestation(keys_, entry.ui);
    }
    return false;
  }

  /// The adopted sequence: every prepared or committed batch evidenced by
  /// the view-change quorum, keyed and ordered by (view, primary counter).
  std::vector<MinbftLogEntry> compute_adopted(const std::vector<ViewChangeMsg>& vcs) const {
    std::vector<ViewChangeMsg> sorted = vcs;
    std::sort(sorted.begin(), sorted.end(),
              [](const ViewChangeMsg& a, const ViewChangeMsg& b) { return a.sender < b.sender; });
    std::map<std::pair<std::uint64_t, std::uint64_t>, MinbftLogEntry> by_key;
    for (const auto& vc : sorted) {
      for (const auto& entry : vc.log) {
        MinbftLogEntry adopted;
        adopted.kind = LogEntryKind::kPrepare;
        if (entry.kind == LogEntryKind::kPrepare) {
          adopted.view = entry.view;
          adopted.batch = entry.batch;
          adopted.ui = entry.ui;
        } else if (entry.kind == LogEntryKind::kCommit) {
          adopted.view = entry.view;
          adopted.batch = entry.batch;
          adopted.ui = entry.primary_ui;
        } else {
          continue;
        }
        auto key = std::make_pair(adopted.view, adopted.ui.counter);
        auto it = by_key.find(key);
        if (it == by_key.end()) {
          by_key.emplace(key, std::move(adopted));
        } else if (batch_digest(it->second.batch) != batch_digest(adopted.batch)) {
          // Impossible with honest counters; keep a deterministic pick.
          if (batch_digest(adopted.batch) < batch_digest(it->second.batch))
            it->second = std::move(adopted);
        }
      }
    }
    std::vector<MinbftLogEntry> out;
    out.reserve(by_key.size());
    for (auto& [key, entry] : by_key) out.push_back(std::move(entry));
    return out;
  }

  void send_new_view(std::uint64_t new_view, Effects& e) {
    newview_sent_.insert(new_view);
    NewViewMsg nv;
    nv.sender = cfg_.id.index;
    nv.new_view = new_view;
    for (const auto& [sender, vc] : vcs_[new_view]) nv.view_changes.push_back(vc);
    std::sort(nv.view_changes.begin(), nv.view_changes.end(),
              [](const ViewChangeMsg& a, const ViewChangeMsg& b) { return a.sender < b.sender; });
    nv.adopted_log = compute_adopted(nv.view_changes);
    nv.ui = usig_.create_ui(newview_core(nv));

    MinbftLogEntry marker;
    marker.kind = LogEntryKind::kNewView;
    marker.view = new_view;
    marker.ui = nv.ui;
    own_log_.push_back(marker);

    broadcast_buffered(nv, new_view, e);
    apply_new_view(nv, e);
  }

  void apply_new_view(const NewViewMsg& nv, Effects& e) {
    view_ = nv.new_view;
    phase_ = Phase::kNormal;
    pending_view_ = 0;
    ++vc_wait_gen_;

    for (const auto& entry : nv.adopted_log) {
      auto key = std::make_pair(entry.view, entry.ui.counter);
      if (executed_marks_.count(key)) continue;
      execute_batch(entry.view, entry.ui.counter, entry.batch, e);
    }

    slots_.clear();
    batched_.clear();
    base_counter_ = nv.ui.counter + 1;
    next_commit_counter_ = base_counter_;
    next_exec_counter_ = base_counter_;
    for (auto it = retransmit_.begin(); it != retransmit_.end();)
      it = (it->tag_view < view_) ? retransmit_.erase(it) : std::next(it);
    for (auto it = reqvc_others_.begin(); it != reqvc_others_.end();)
      it = (it->first <= view_) ? reqvc_others_.erase(it) : std::next(it);
    for (auto it = vcs_.begin(); it != vcs_.end();)
      it = (it->first <= view_) ? vcs_.erase(it) : std::next(it);

    e.record_view(view_);

    if (!pending_.empty()) {
      if (is_primary()) {
        cut_batches(e);
      } else {
        for (const Command& cmd : pending_)
          e.send(primary_of(view_, cfg_.params.n), ClientRequestMsg{cmd});
      }
    }
    cancel_progress();
    if (work_pending()) arm_progress(e);

    auto deferred = std::move(deferred_);
    deferred_.clear();
    for (const auto& msg : deferred) handle(msg, e);
  }

  // --- retransmission -------------------------------------------------------

  struct Unacked {
    std::uint64_t tag_view;
    ProtocolMessage msg;
  };

  void broadcast_buffered(ProtocolMessage msg, std::uint64_t tag_view, Effects& e) {
    e.broadcast(msg);
    retransmit_.push_back({tag_view, std::move(msg)});
    if (!retransmit_armed_) {
      retransmit_armed_ = true;
      e.arm(TimerKind::kRetransmit, cfg_.retransmit_ms, 0);
    }
  }

  void retransmit(Effects& e) {
    for (const auto& u : retransmit_)
      if (u.tag_view >= view_) e.broadcast(u.msg);
    if (work_pending() && !retransmit_.empty()) {
      retransmit_armed_ = true;
      e.arm(TimerKind::kRetransmit, cfg_.retransmit_ms, 0);
    }
  }

  void prune_retransmits() {
    // Prepares and commits already executed locally stop being resent.
    for (auto it = retransmit_.begin(); it != retransmit_.end();) {
      std::uint64_t counter = 0;
      if (const auto* p = std::get_if<PrepareMsg>(&it->msg)) counter = p->ui.counter;
      if (const auto* c = std::get_if<CommitMsg>(&it->msg)) counter = c->primary_ui.counter;
      if (counter != 0 && counter < next_exec_counter_ && it->tag_view == view_)
        it = retransmit_.erase(it);
      else
        ++it;
    }
  }

  void arm_progress(Effects& e) {
    ++progress_gen_;
    progress_armed_gen_ = progress_gen_;
    e.arm(TimerKind::kProgress, timeout_ms(), progress_gen_);
  }

  void cancel_progress() { ++progress_gen_; }

  void arm_progress_if_idle(Effects& e) {
    if (progress_armed_gen_ == progress_gen_) return;  // already armed
    if (!work_pending() || phase_ != Phase::kNormal) return;
    arm_progress(e);
  }

  ReplicaConfig cfg_;
  KeyDirectory keys_;
  VerifyCache* cache_ = nullptr;
  UsigInstance usig_;

  std::uint64_t view_ = 0;
  Phase phase_ = Phase::kNormal;
  std::uint64_t pending_view_ = 0;
  std::uint32_t consecutive_vcs_ = 0;

  std::uint64_t base_counter_ = 1;
  std::uint64_t next_commit_counter_ = 1;
  std::uint64_t next_exec_counter_ = 1;
  std::map<std::uint64_t, Slot> slots_;

  std::vector<Command> pending_;
  std::set<std::pair<std::uint32_t, std::uint64_t>> pending_index_;
  std::set<std::pair<std::uint32_t, std::uint64_t>> batched_;

  ExecLedger ledger_;
  std::uint64_t exec_index_ = 0;
  std::set<std::pair<std::uint64_t, std::uint64_t>> executed_marks_;  // (view, counter)
  std::map<std::uint32_t, ClientReplyMsg> reply_cache_;

  std::vector<MinbftLogEntry> own_log_;
  std::uint64_t prepares_sent_ = 0;
  bool reproposed_ = false;

  std::map<std::uint64_t, std::set<std::uint32_t>> reqvc_others_;
  std::set<std::uint64_t> self_reqvc_;
  std::map<std::uint64_t, std::map<std::uint32_t, ViewChangeMsg>> vcs_;
  std::set<std::uint64_t> newview_sent_;
  std::vector<ProtocolMessage> deferred_;

  std::vector<Unacked> retransmit_;
  bool retransmit_armed_ = false;

  std::uint64_t progress_gen_ = 0;
  std::uint64_t progress_armed_gen_ = 0;
  std::uint64_t vc_wait_gen_ = 0;
};

}  // namespace duokit
