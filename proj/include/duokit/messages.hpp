#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "duokit/crypto.hpp"
#include "duokit/serialize.hpp"
#include "duokit/usig.hpp"

namespace duokit {

inline constexpr std::uint32_t kDefaultBatchSize = 200;
inline constexpr std::uint32_t kDefaultPayloadSize = 512;

/// Fault model a client wants its response under.
enum class ResponseModel : std::uint8_t { kHybrid = 0, kBft = 1, kBoth = 2 };

/// Fault model a commit or reply is tagged with.
enum class CommitModel : std::uint8_t { kHybrid = 0, kBft = 1 };

inline const char* model_name(CommitModel m) { return m == CommitModel::kHybrid ? "H" : "B"; }

struct Command {
  std::uint32_t client = 0;
  std::uint64_t sequence = 0;
  ResponseModel response_model = ResponseModel::kHybrid;
  Bytes payload;

  bool operator==(const Command&) const = default;

  bool wants(CommitModel m) const {
    if (response_model == ResponseModel::kBoth) return true;
    return (m == CommitModel::kHybrid) == (response_model == ResponseModel::kHybrid);
  }
};

/// Chained block: height k, hash link to the predecessor, and a command
/// batch. Only the genesis block (height 1) has a null parent. `instance`
/// is the chain lane; 0 for single-chain runs.
struct Block {
  std::uint64_t height = 0;
  std::optional<Digest> parent_digest;
  std::uint32_t instance = 0;
  std::vector<Command> commands;

  bool operator==(const Block&) const = default;
};

enum class QcFlavor : std::uint8_t { kHybrid = 0, kBft = 1 };

/// Threshold set of distinct-replica USIG attestations over one block's
/// vote context. Hybrid flavor needs f+1 entries, BFT flavor 2f+1.
struct QuorumCertificate {
  QcFlavor flavor = QcFlavor::kHybrid;
  std::uint64_t view = 0;
  std::uint32_t instance = 0;
  std::uint64_t height = 0;
  Digest block_digest;
  std::vector<UsigCertificate> votes;  // sorted by replica index, unique

  bool operator==(const QuorumCertificate&) const = default;
};

// --- message structs ------------------------------------------------------

struct ClientRequestMsg {
  Command command;
  bool operator==(const ClientRequestMsg&) const = default;
};

struct ClientReplyMsg {
  std::uint32_t replica = 0;
  std::uint32_t client = 0;
  std::uint64_t sequence = 0;
  CommitModel model = CommitModel::kHybrid;
  Digest result;
  bool operator==(const ClientReplyMsg&) const = default;
};

struct ProposeMsg {
  std::uint64_t view = 0;
  std::uint32_t sender = 0;
  Block block;
  UsigCertificate ui;  // attests the block's vote core
  bool operator==(const ProposeMsg&) const = default;
};

struct VoteMsg {
  std::uint64_t view = 0;
  std::uint32_t sender = 0;
  std::uint32_t instance = 0;
  std::uint64_t height = 0;
  Digest block_digest;
  UsigCertificate proposer_ui;
  UsigCertificate voter_ui;  // attests the same vote core
  bool operator==(const VoteMsg&) const = default;
};

struct CertBroadcastMsg {
  std::uint64_t view = 0;
  std::uint32_t sender = 0;
  QuorumCertificate cert;
  bool operator==(const CertBroadcastMsg&) const = default;
};

struct PrepareMsg {
  std::uint64_t view = 0;
  std::uint32_t sender = 0;
  std::vector<Command> batch;
  UsigCertificate ui;
  bool operator==(const PrepareMsg&) const = default;
};

struct CommitMsg {
  std::uint64_t view = 0;
  std::uint32_t sender = 0;
  std::uint32_t primary = 0;
  std::vector<Command> batch;
  UsigCertificate primary_ui;
  UsigCertificate ui;
  bool operator==(const CommitMsg&) const = default;
};

struct ReqViewChangeMsg {
  std::uint32_t sender = 0;
  std::uint64_t old_view = 0;
  std::uint64_t new_view = 0;
  bool operator==(const ReqViewChangeMsg&) const = default;
};

enum class LogEntryKind : std::uint8_t {
  kPrepare = 0,
  kCommit = 1,
  kViewChange = 2,
  kNewView = 3,
};

/// One UI-attested message from a replica's own generated-message log,
/// carried inside ViewChange. Prepare/Commit entries carry enough to
/// rebuild the adopted sequence; ViewChange/NewView entries are counter
/// placeholders so the log tiles 1..k without holes.
struct MinbftLogEntry {
  LogEntryKind kind = LogEntryKind::kPrepare;
  std::uint64_t view = 0;
  std::vector<Command> batch;       // kPrepare, kCommit
  std::uint32_t primary = 0;        // kCommit
  UsigCertificate primary_ui;       // kCommit
  UsigCertificate ui;               // always: the sender's own attestation
  bool operator==(const MinbftLogEntry&) const = default;
};

/// A block plus whichever quorum certificates the sender holds for it.
struct CertifiedBlock {
  Block block;
  std::optional<QuorumCertificate> hybrid;
  std::optional<QuorumCertificate> bft;
  bool operator==(const CertifiedBlock&) const = default;
};

struct ViewChangeMsg {
  std::uint32_t sender = 0;
  std::uint64_t new_view = 0;
  std::vector<MinbftLogEntry> log;        // minbft: full own attested log
  std::vector<CertifiedBlock> certified;  // duobft: blocks with certificates
  UsigCertificate ui;
  bool operator==(const ViewChangeMsg&) const = default;
};

struct NewViewMsg {
  std::uint32_t sender = 0;
  std::uint64_t new_view = 0;
  std::vector<ViewChangeMsg> view_changes;     // the new-view certificate V_vc
  std::vector<MinbftLogEntry> adopted_log;     // minbft adopted sequence S
  std::vector<CertifiedBlock> adopted_chain;   // duobft adopted sequence S
  UsigCertificate ui;
  bool operator==(const NewViewMsg&) const = default;
};

using ProtocolMessage =
    std::variant<ClientRequestMsg, ClientReplyMsg, ProposeMsg, VoteMsg, CertBroadcastMsg,
                 PrepareMsg, CommitMsg, ReqViewChangeMsg, ViewChangeMsg, NewViewMsg>;

// --- canonical encoding ----------------------------------------------------

namespace wire {

inline constexpr std::uint8_t kClientRequest = 1;
inline constexpr std::uint8_t kClientReply = 2;
inline constexpr std::uint8_t kPropose = 3;
inline constexpr std::uint8_t kVote = 4;
inline constexpr std::uint8_t kCertBroadcast = 5;
inline constexpr std::uint8_t kPrepare = 6;
inline constexpr std::uint8_t kCommit = 7;
inline constexpr std::uint8_t kReqViewChange = 8;
inline constexpr std::uint8_t kViewChange = 9;
inline constexpr std::uint8_t kNewView = 10;

inline void put_digest(Writer& w, const Digest& d) { w.raw(d.bytes.data(), d.bytes.size()); }

inline Digest get_digest(Reader& r) {
  Digest d;
  r.raw(d.bytes.data(), d.bytes.size());
  return d;
}

inline void put_opt_digest(Writer& w, const std::optional<Digest>& d) {
  w.u8(d ? 1 : 0);
  if (d) put_digest(w, *d);
}

inline std::optional<Digest> get_opt_digest(Reader& r) {
  std::uint8_t flag = r.u8();
  if (flag == 0) return std::nullopt;
  return get_digest(r);
}

inline void put_ui(Writer& w, const UsigCertificate& ui) {
  w.u32(ui.replica.index);
  w.u64(ui.counter);
  put_digest(w, ui.message_digest);
  w.raw(ui.signature.bytes.data(), ui.signature.bytes.size());
}

inline UsigCertificate get_ui(Reader& r) {
  UsigCertificate ui;
  ui.replica.index = r.u32();
  ui.counter = r.u64();
  ui.message_digest = get_digest(r);
  r.raw(ui.signature.bytes.data(), ui.signature.bytes.size());
  return ui;
}

inline void put_command(Writer& w, const Command& c) {
  w.u32(c.client);
  w.u64(c.sequence);
  w.u8(static_cast<std::uint8_t>(c.response_model));
  w.bytes(c.payload);
}

inline Command get_command(Reader& r) {
  Command c;
  c.client = r.u32();
  c.sequence = r.u64();
  c.response_model = static_cast<ResponseModel>(r.u8());
  c.payload = r.bytes();
  return c;
}

inline void put_batch(Writer& w, const std::vector<Command>& batch) {
  w.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& c : batch) put_command(w, c);
}

inline std::vector<Command> get_batch(Reader& r) {
  std::uint32_t n = r.u32();
  std::vector<Command> batch;
  for (std::uint32_t i = 0; i < n && r.ok(); ++i) batch.push_back(get_command(r));
  return batch;
}

inline void put_block(Writer& w, const Block& b) {
  w.u64(b.height);
  put_opt_digest(w, b.parent_digest);
  w.u32(b.instance);
  put_batch(w, b.commands);
}

inline Block get_block(Reader& r) {
  Block b;
  b.height = r.u64();
  b.parent_digest = get_opt_digest(r);
  b.instance = r.u32();
  b.commands = get_batch(r);
  return b;
}

inline void put_qc(Writer& w, const QuorumCertificate& qc) {
  w.u8(static_cast<std::uint8_t>(qc.flavor));
  w.u64(qc.view);
  w.u32(qc.instance);
  w.u64(qc.height);
  put_digest(w, qc.block_digest);
  w.u32(static_cast<std::uint32_t>(qc.votes.size()));
  for (const auto& v : qc.votes) put_ui(w, v);
}

inline QuorumCertificate get_qc(Reader& r) {
  QuorumCertificate qc;
  qc.flavor = static_cast<QcFlavor>(r.u8());
  qc.view = r.u64();
  qc.instance = r.u32();
  qc.height = r.u64();
  qc.block_digest = get_digest(r);
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n && r.ok(); ++i) qc.votes.push_back(get_ui(r));
  return qc;
}

inline void put_log_entry(Writer& w, const MinbftLogEntry& e) {
  w.u8(static_cast<std::uint8_t>(e.kind));
  w.u64(e.view);
  switch (e.kind) {
    case LogEntryKind::kPrepare:
      put_batch(w, e.batch);
      break;
    case LogEntryKind::kCommit:
      w.u32(e.primary);
      put_ui(w, e.primary_ui);
      put_batch(w, e.batch);
      break;
    case LogEntryKind::kViewChange:
    case LogEntryKind::kNewView:
      break;
  }
  put_ui(w, e.ui);
}

inline MinbftLogEntry get_log_entry(Reader& r) {
  MinbftLogEntry e;
  e.kind = static_cast<LogEntryKind>(r.u8());
  e.view = r.u64();
  switch (e.kind) {
    case LogEntryKind::kPrepare:
      e.batch = get_batch(r);
      break;
    case LogEntryKind::kCommit:
      e.primary = r.u32();
      e.primary_ui = get_ui(r);
      e.batch = get_batch(r);
      break;
    case LogEntryKind::kViewChange:
    case LogEntryKind::kNewView:
      break;
  }
  e.ui = get_ui(r);
  return e;
}

inline void put_certified_block(Writer& w, const CertifiedBlock& cb) {
  put_block(w, cb.block);
  w.u8(cb.hybrid ? 1 : 0);
  if (cb.hybrid) put_qc(w, *cb.hybrid);
  w.u8(cb.bft ? 1 : 0);
  if (cb.bft) put_qc(w, *cb.bft);
}

inline CertifiedBlock get_certified_block(Reader& r) {
  CertifiedBlock cb;
  cb.block = get_block(r);
  if (r.u8()) cb.hybrid = get_qc(r);
  if (r.u8()) cb.bft = get_qc(r);
  return cb;
}

inline void put_viewchange_body(Writer& w, const ViewChangeMsg& m) {
  w.u32(m.sender);
  w.u64(m.new_view);
  w.u32(static_cast<std::uint32_t>(m.log.size()));
  for (const auto& e : m.log) put_log_entry(w, e);
  w.u32(static_cast<std::uint32_t>(m.certified.size()));
  for (const auto& cb : m.certified) put_certified_block(w, cb);
}

inline void put_viewchange(Writer& w, const ViewChangeMsg& m) {
  put_viewchange_body(w, m);
  put_ui(w, m.ui);
}

inline ViewChangeMsg get_viewchange(Reader& r) {
  ViewChangeMsg m;
  m.sender = r.u32();
  m.new_view = r.u64();
  std::uint32_t nlog = r.u32();
  for (std::uint32_t i = 0; i < nlog && r.ok(); ++i) m.log.push_back(get_log_entry(r));
  std::uint32_t ncb = r.u32();
  for (std::uint32_t i = 0; i < ncb && r.ok(); ++i) m.certified.push_back(get_certified_block(r));
  m.ui = get_ui(r);
  return m;
}

inline void put_newview_body(Writer& w, const NewViewMsg& m) {
  w.u32(m.sender);
  w.u64(m.new_view);
  w.u32(static_cast<std::uint32_t>(m.view_changes.size()));
  for (const auto& vc : m.view_changes) put_viewchange(w, vc);
  w.u32(static_cast<std::uint32_t>(m.adopted_log.size()));
  for (const auto& e : m.adopted_log) put_log_entry(w, e);
  w.u32(static_cast<std::uint32_t>(m.adopted_chain.size()));
  for (const auto& cb : m.adopted_chain) put_certified_block(w, cb);
}

}  // namespace wire

/// Digest of the canonical batch encoding.
inline Digest batch_digest(const std::vector<Command>& batch) {
  Writer w;
  wire::put_batch(w, batch);
  return hash(w.peek());
}

/// H(B_k): digest of the canonical block encoding. Depends on the parent
/// digest, so it binds the whole chain.
inline Digest block_digest(const Block& b) {
  Writer w;
  wire::put_block(w, b);
  return hash(w.peek());
}

// --- attestation cores ------------------------------------------------------
// The byte strings USIG certificates are created over. A Propose's UI and the
// Votes for the same block attest the same vote core, so the proposal doubles
// as the primary's endorsement of the block where the quorum rules allow it.

inline Bytes vote_core(std::uint64_t view, std::uint32_t instance, std::uint64_t height,
                       const Digest& block_dig) {
  Writer w;
  w.u8(0xC1);
  w.u64(view);
  w.u32(instance);
  w.u64(height);
  wire::put_digest(w, block_dig);
  return w.take();
}

inline Bytes prepare_core(std::uint64_t view, const Digest& batch_dig) {
  Writer w;
  w.u8(0xC2);
  w.u64(view);
  wire::put_digest(w, batch_dig);
  return w.take();
}

inline Bytes commit_core(std::uint64_t view, std::uint32_t primary, std::uint64_t primary_counter,
                         const Digest& batch_dig) {
  Writer w;
  w.u8(0xC3);
  w.u64(view);
  w.u32(primary);
  w.u64(primary_counter);
  wire::put_digest(w, batch_dig);
  return w.take();
}

inline Bytes viewchange_core(const ViewChangeMsg& m) {
  Writer w;
  w.u8(0xC4);
  wire::put_viewchange_body(w, m);
  return w.take();
}

inline Bytes newview_core(const NewViewMsg& m) {
  Writer w;
  w.u8(0xC5);
  w.u32(m.sender);
  w.u64(m.new_view);
  // The adopted sequence and the certificate it was computed from are what
  // the attestation must pin down.
  Writer body;
  wire::put_newview_body(body, m);
  wire::put_digest(w, hash(body.peek()));
  return w.take();
}

// --- envelope ---------------------------------------------------------------

inline Bytes encode(const ProtocolMessage& msg) {
  Writer w;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ClientRequestMsg>) {
          w.u8(wire::kClientRequest);
          wire::put_command(w, m.command);
        } else if constexpr (std::is_same_v<T, ClientReplyMsg>) {
          w.u8(wire::kClientReply);
          w.u32(m.replica);
          w.u32(m.client);
          w.u64(m.sequence);
          w.u8(static_cast<std::uint8_t>(m.model));
          wire::put_digest(w, m.result);
        } else if constexpr (std::is_same_v<T, ProposeMsg>) {
          w.u8(wire::kPropose);
          w.u64(m.view);
          w.u32(m.sender);
          wire::put_block(w, m.block);
          wire::put_ui(w, m.ui);
        } else if constexpr (std::is_same_v<T, VoteMsg>) {
          w.u8(wire::kVote);
          w.u64(m.view);
          w.u32(m.sender);
          w.u32(m.instance);
          w.u64(m.height);
          wire::put_digest(w, m.block_digest);
          wire::put_ui(w, m.proposer_ui);
          wire::put_ui(w, m.voter_ui);
        } else if constexpr (std::is_same_v<T, CertBroadcastMsg>) {
          w.u8(wire::kCertBroadcast);
          w.u64(m.view);
          w.u32(m.sender);
          wire::put_qc(w, m.cert);
        } else if constexpr (std::is_same_v<T, PrepareMsg>) {
          w.u8(wire::kPrepare);
          w.u64(m.view);
          w.u32(m.sender);
          wire::put_batch(w, m.batch);
          wire::put_ui(w, m.ui);
        } else if constexpr (std::is_same_v<T, CommitMsg>) {
          w.u8(wire::kCommit);
          w.u64(m.view);
          w.u32(m.sender);
          w.u32(m.primary);
          wire::put_batch(w, m.batch);
          wire::put_ui(w, m.primary_ui);
          wire::put_ui(w, m.ui);
        } else if constexpr (std::is_same_v<T, ReqViewChangeMsg>) {
          w.u8(wire::kReqViewChange);
          w.u32(m.sender);
          w.u64(m.old_view);
          w.u64(m.new_view);
        } else if constexpr (std::is_same_v<T, ViewChangeMsg>) {
          w.u8(wire::kViewChange);
          wire::put_viewchange(w, m);
        } else if constexpr (std::is_same_v<T, NewViewMsg>) {
          w.u8(wire::kNewView);
          wire::put_newview_body(w, m);
          wire::put_ui(w, m.ui);
        }
      },
      msg);
  return w.take();
}

/// Decodes one message. Truncated or malformed buffers yield nullopt; a
/// partial message is never returned.
inline std::optional<ProtocolMessage> decode(std::span<const std::uint8_t> data) {
  Reader r(data);
  std::uint8_t tag = r.u8();
  ProtocolMessage out;
  switch (tag) {
    case wire::kClientRequest: {
      ClientRequestMsg m;
      m.command = wire::get_command(r);
      out = m;
      break;
    }
    case wire::kClientReply: {
      ClientReplyMsg m;
      m.replica = r.u32();
      m.client = r.u32();
      m.sequence = r.u64();
      std::uint8_t model = r.u8();
      if (model > 1) return std::nullopt;
      m.model = static_cast<CommitModel>(model);
      m.result = wire::get_digest(r);
      out = m;
      break;
    }
    case wire::kPropose: {
      ProposeMsg m;
      m.view = r.u64();
      m.sender = r.u32();
      m.block = wire::get_block(r);
      m.ui = wire::get_ui(r);
      out = m;
      break;
    }
    case wire::kVote: {
      VoteMsg m;
      m.view = r.u64();
      m.sender = r.u32();
      m.instance = r.u32();
      m.height = r.u64();
      m.block_digest = wire::get_digest(r);
      m.proposer_ui = wire::get_ui(r);
      m.voter_ui = wire::get_ui(r);
      out = m;
      break;
    }
    case wire::kCertBroadcast: {
      CertBroadcastMsg m;
      m.view = r.u64();
      m.sender = r.u32();
      m.cert = wire::get_qc(r);
      out = m;
      break;
    }
    case wire::kPrepare: {
      PrepareMsg m;
      m.view = r.u64();
      m.sender = r.u32();
      m.batch = wire::get_batch(r);
      m.ui = wire::get_ui(r);
      out = m;
      break;
    }
    case wire::kCommit: {
      CommitMsg m;
      m.view = r.u64();
      m.sender = r.u32();
      m.primary = r.u32();
      m.batch = wire::get_batch(r);
      m.primary_ui = wire::get_ui(r);
      m.ui = wire::get_ui(r);
      out = m;
      break;
    }
    case wire::kReqViewChange: {
      ReqViewChangeMsg m;
      m.sender = r.u32();
      m.old_view = r.u64();
      m.new_view = r.u64();
      out = m;
      break;
    }
    case wire::kViewChange: {
      out = wire::get_viewchange(r);
      break;
    }
    case wire::kNewView: {
      NewViewMsg m;
      m.sender = r.u32();
      m.new_view = r.u64();
      std::uint32_t nvc = r.u32();
      for (std::uint32_t i = 0; i < nvc && r.ok(); ++i)
        m.view_changes.push_back(wire::get_viewchange(r));
      std::uint32_t nlog = r.u32();
      for (std::uint32_t i = 0; i < nlog && r.ok(); ++i)
        m.adopted_log.push_back(wire::get_log_entry(r));
      std::uint32_t ncb = r.u32();
      for (std::uint32_t i = 0; i < ncb && r.ok(); ++i)
        m.adopted_chain.push_back(wire::get_certified_block(r));
      m.ui = wire::get_ui(r);
      out = m;
      break;
    }
    default:
      return std::nullopt;
  }
  if (!r.done()) return std::nullopt;
  return out;
}

inline const char* message_kind(const ProtocolMessage& msg) {
  return std::visit(
      [](const auto& m) -> const char* {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ClientRequestMsg>) return "request";
        else if constexpr (std::is_same_v<T, ClientReplyMsg>) return "reply";
        else if constexpr (std::is_same_v<T, ProposeMsg>) return "propose";
        else if constexpr (std::is_same_v<T, VoteMsg>) return "vote";
        else if constexpr (std::is_same_v<T, CertBroadcastMsg>) return "cert";
        else if constexpr (std::is_same_v<T, PrepareMsg>) return "prepare";
        else if constexpr (std::is_same_v<T, CommitMsg>) return "commit";
        else if constexpr (std::is_same_v<T, ReqViewChangeMsg>) return "reqviewchange";
        else if constexpr (std::is_same_v<T, ViewChangeMsg>) return "viewchange";
        else return "newview";
      },
      msg);
}

}  // namespace duokit
