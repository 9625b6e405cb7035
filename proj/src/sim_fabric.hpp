// Copyright 2026 The embserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "fabric.hpp"
#include "hash.hpp"

namespace embserve {

struct PostRecord {
  ConnId conn;
  uint64_t seq = 0;
  bool credit = false;
  EngineId engine;
  UnitId unit;
  Tick start = 0;
  Tick end = 0;
};

struct MigrationReport {
  ConnId conn;
  EngineId from;
  EngineId to;
  DomainId old_domain;
  DomainId new_domain;
  bool no_op = false;
};

// Deterministic discrete-event model of the ranker-side RDMA engines, the
// RNIC parallelism units, the embedding servers and the credit loop.
//
// Each engine is one I/O thread that posts queued messages one at a time
// (high priority first, then FIFO). A post occupies the connection's
// parallelism unit for base_service_time, plus lock_overhead when the unit
// is reachable from two or more engines; an engine whose unit is busy waits.
class VirtualFabric final : public Fabric {
 public:
  VirtualFabric(const TransportParams& params, const Deployment* deployment,
                std::vector<ServerId> peers);

  void Submit(Subrequest request) override;
  // Submits on an explicit data connection. Returns the message sequence
  // number on that connection.
  uint64_t SubmitOn(ConnId conn, Subrequest request);
  std::vector<Completion> WaitCompletions() override;
  void AdvanceTo(Tick t) override;
  Tick Now() const override { return now_; }
  uint64_t Outstanding() const override { return stats_.submitted - stats_.completed; }
  TransportStats Stats() const override { return stats_; }
  const TransportStats& stats() const { return stats_; }
  const Topology& topology() const override { return topology_; }
  Backend backend() const override { return Backend::kVirtualTime; }

  // Runs until no event is pending. Throws Error(kInvariant) if any
  // subrequest is left incomplete.
  void RunToQuiescence();

  // Quiesce, detach from the old domain, attach to `to`'s domain, resume.
  // The move completes asynchronously in virtual time.
  MigrationReport Migrate(ConnId conn, EngineId to);
  // Sends the freed credits of `data_conn` on its peer's high-priority
  // connection now.
  void SendCreditFast(ConnId data_conn);

  EngineId owner(ConnId conn) const { return conns_.at(conn.value).engine; }
  DomainId domain(ConnId conn) const { return conns_.at(conn.value).domain; }
  bool migrating(ConnId conn) const { return conns_.at(conn.value).migrating; }
  const CreditState& credit(ConnId conn) const { return conns_.at(conn.value).credit; }
  std::vector<ConnId> DataConnections(ServerId peer) const;
  std::optional<ConnId> CreditChannel(ServerId peer) const;
  uint32_t num_engines() const { return static_cast<uint32_t>(engines_.size()); }
  uint64_t EngineBacklog(EngineId engine) const;
  uint64_t ConnBacklog(ConnId conn) const { return conns_.at(conn.value).queued; }
  bool UnitShared(UnitId unit) const { return engines_per_unit_.at(unit.value) >= 2; }
  bool AnyUnitShared() const;

  void EnablePostLog(bool on) { post_log_enabled_ = on; }
  const std::vector<PostRecord>& post_log() const { return post_log_; }
  // Digest over every processed event; equal digests mean equal traces.
  uint64_t trace_digest() const { return digest_.digest(); }

 private:
  enum class EventKind : uint8_t {
    kSubmit, kPostStart, kPostDone, kServerArrive, kServerDone, kResponseSent,
    kRankerArrive, kConsumed, kCreditDelivered, kMigrateStart, kMigrateDone, kSample,
    kCreditSend,
  };
  struct TraceEntry {
    Tick time;
    EventKind kind;
    uint64_t a;
    uint64_t b;
  };
  struct Event {
    Tick time;
    uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  enum class MsgKind : uint8_t { kRequest, kCredit };
  struct Grant {
    ConnId conn;  // data connection whose credits are returned
    uint32_t credits = 0;
    double free_time_sum = 0;
  };
  struct Msg {
    MsgKind kind = MsgKind::kRequest;
    ConnId conn;          // carrier connection
    uint64_t seq = 0;     // per-carrier sequence number
    std::vector<Grant> grants;
    // Credit messages: data connections whose credits are collected when
    // the message is posted.
    std::vector<ConnId> credit_conns;
    uint64_t bytes = 0;
    size_t request = 0;   // index into requests_ (kRequest only)
    Priority priority = Priority::kNormal;
  };
  struct RequestState {
    Subrequest req;
    ConnId conn;
    Tick submitted = 0;
    Tick posted = 0;
    SubrequestBytes bytes;
    std::vector<SliceReply> reply;
  };
  struct ConnState {
    ConnectionSpec spec;
    EngineId engine;
    DomainId domain;
    uint64_t next_seq = 0;
    uint64_t next_post_seq = 0;
    uint64_t queued = 0;
    bool in_service = false;
    // Migration.
    bool migrating = false;
    bool detach_pending = false;
    EngineId migrate_to;
    std::deque<uint64_t> moving;
    std::deque<uint64_t> quiesce_buffer;
    std::deque<uint64_t> holdback;
    // Ranker side of the credit loop.
    CreditState credit;
    uint32_t task_queue = 0;
    double free_time_sum = 0;
    bool grace_armed = false;
    std::optional<uint64_t> open_credit;
    // Server side.
    std::deque<size_t> responses;
    Tick stalled_since = -1;
    Tick last_arrival = 0;
  };
  enum class EngineState : uint8_t { kIdle, kWaitingUnit, kPosting };
  struct EngineCtx {
    EngineId id;
    std::deque<uint64_t> high;
    std::deque<uint64_t> normal;
    EngineState state = EngineState::kIdle;
    uint64_t current = 0;
    std::optional<DomainId> home;
  };
  struct UnitCtx {
    bool busy = false;
    std::deque<EngineId> waiters_high;
    std::deque<EngineId> waiters_normal;
  };
  struct ServerCtx {
    uint32_t free_slots = 0;
    std::deque<uint64_t> queue;
  };

  void Schedule(Tick at, std::function<void()> fn);
  bool Step();
  void Note(EventKind kind, uint64_t a, uint64_t b = 0);
  [[noreturn]] void Violation(const std::string& what) const;

  void Enqueue(uint64_t msg_id);
  void PushToEngine(uint64_t msg_id);
  void StartNext(EngineId engine);
  void BeginPost(EngineId engine);
  void PostDone(EngineId engine);
  void ServerArrive(uint64_t msg_id);
  void TryServe(ServerId server);
  void ServerDone(ServerId server, uint64_t msg_id);
  void TrySend(ConnId conn);
  void RankerArrive(size_t request);
  void TryConsume();
  void Consumed(size_t request);
  void DeliverCredits(const Grant& grant);
  void OnCreditFreed(ConnId conn);
  void SendCreditMessage(ConnId data_conn, bool fast);
  void Detach(ConnId conn);
  void Attach(ConnId conn);
  void ArmSampler();
  void Sample();
  void RecomputeSharing();
  void CheckCredit(const ConnState& c);
  Tick TransferTime(uint64_t bytes) const;

  TransportParams params_;
  const Deployment* deployment_;
  Topology topology_;
  std::vector<ConnState> conns_;
  std::vector<EngineCtx> engines_;
  std::vector<UnitCtx> units_;
  std::vector<uint32_t> engines_per_unit_;
  std::map<ServerId, ServerCtx> servers_;
  std::map<ServerId, std::vector<ConnId>> peer_conns_;
  std::map<ServerId, ConnId> credit_channel_;
  std::map<ServerId, size_t> peer_cursor_;
  std::map<ServerId, uint64_t> open_fast_;  // unposted fast credit message per peer

  std::vector<Msg> msgs_;
  std::vector<RequestState> requests_;
  std::deque<size_t> arrivals_;
  uint32_t free_workers_ = 0;
  Tick link_free_ = 0;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  uint64_t event_seq_ = 0;
  Tick now_ = 0;
  bool sampler_armed_ = false;

  std::vector<Completion> ready_;
  TransportStats stats_;
  Fnv1a64 digest_;
  std::vector<TraceEntry> ring_;
  size_t ring_next_ = 0;
  bool post_log_enabled_ = false;
  std::vector<PostRecord> post_log_;
};

}  // namespace embserve
