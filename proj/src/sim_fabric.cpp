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

#include "sim_fabric.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "error.hpp"
#include "store.hpp"

namespace embserve {

namespace {

constexpr size_t kRingSize = 64;

const char* EventName(int kind) {
  static const char* const kNames[] = {
      "submit", "post-start", "post-done", "server-arrive", "server-done", "response-sent",
      "ranker-arrive", "consumed", "credit-delivered", "migrate-start", "migrate-done",
      "sample", "credit-send"};
  return kNames[kind];
}

}  // namespace

VirtualFabric::VirtualFabric(const TransportParams& params, const Deployment* deployment,
                             std::vector<ServerId> peers)
    : params_(params), deployment_(deployment) {
  params_.Validate();
  std::sort(peers.begin(), peers.end());
  peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
  if (peers.empty()) Fail(ErrorCode::kConfig, "transport: no peers to connect to");
  if (params_.num_connections < peers.size()) {
    Fail(ErrorCode::kConfig, fmt::format("transport.num_connections: need at least one per "
                                         "peer ({} peers)", peers.size()));
  }

  const auto conn_peers = InterleavedPeers(peers, params_.num_connections);
  topology_ = CreateConnections(params_.num_units, conn_peers);
  AddCreditChannels(topology_, peers);
  const Assignment assignment = params_.assignment == AssignmentPolicy::kMappingAware
                                    ? AssignMappingAware(topology_, params_.num_engines)
                                    : AssignNaive(topology_, params_.num_engines);

  engines_.resize(params_.num_engines);
  for (uint32_t e = 0; e < params_.num_engines; ++e) engines_[e].id = EngineId(e);
  units_.resize(params_.num_units);
  conns_.reserve(topology_.connections.size());
  for (const auto& spec : topology_.connections) {
    ConnState c;
    c.spec = spec;
    c.engine = assignment.owner[spec.id.value];
    c.domain = spec.domain;
    c.credit = CreditState(spec.priority == Priority::kNormal ? params_.queue_capacity : 0);
    auto& home = engines_[c.engine.value].home;
    if (!home || spec.domain < *home) home = spec.domain;
    if (spec.priority == Priority::kNormal) {
      peer_conns_[spec.peer].push_back(spec.id);
    } else {
      credit_channel_[spec.peer] = spec.id;
    }
    conns_.push_back(std::move(c));
  }
  for (ServerId p : peers) servers_[p].free_slots = params_.cpu_budget;
  free_workers_ = params_.ranker_workers;
  ring_.resize(kRingSize);
  RecomputeSharing();
}

void VirtualFabric::RecomputeSharing() {
  std::vector<std::set<EngineId>> engines(params_.num_units);
  for (const auto& c : conns_) engines[Topology::UnitOf(c.domain).value].insert(c.engine);
  engines_per_unit_.assign(params_.num_units, 0);
  for (uint32_t u = 0; u < params_.num_units; ++u) {
    engines_per_unit_[u] = static_cast<uint32_t>(engines[u].size());
  }
}

bool VirtualFabric::AnyUnitShared() const {
  return std::any_of(engines_per_unit_.begin(), engines_per_unit_.end(),
                     [](uint32_t n) { return n >= 2; });
}

std::vector<ConnId> VirtualFabric::DataConnections(ServerId peer) const {
  auto it = peer_conns_.find(peer);
  return it == peer_conns_.end() ? std::vector<ConnId>{} : it->second;
}

std::optional<ConnId> VirtualFabric::CreditChannel(ServerId peer) const {
  auto it = credit_channel_.find(peer);
  if (it == credit_channel_.end()) return std::nullopt;
  return it->second;
}

uint64_t VirtualFabric::EngineBacklog(EngineId engine) const {
  const auto& e = engines_.at(engine.value);
  return e.high.size() + e.normal.size();
}

Tick VirtualFabric::TransferTime(uint64_t bytes) const {
  return static_cast<Tick>(std::ceil(static_cast<double>(bytes) * 8.0 / params_.link_gbps));
}

void VirtualFabric::Schedule(Tick at, std::function<void()> fn) {
  events_.push(Event{std::max(at, now_), event_seq_++, std::move(fn)});
}

bool VirtualFabric::Step() {
  if (events_.empty()) return false;
  Event ev = std::move(const_cast<Event&>(events_.top()));
  events_.pop();
  now_ = ev.time;
  ev.fn();
  return true;
}

void VirtualFabric::Note(EventKind kind, uint64_t a, uint64_t b) {
  digest_.Update(static_cast<uint64_t>(now_));
  digest_.Update((static_cast<uint64_t>(kind) << 56) ^ (a << 24) ^ b);
  ring_[ring_next_ % kRingSize] = TraceEntry{now_, kind, a, b};
  ++ring_next_;
}

void VirtualFabric::Violation(const std::string& what) const {
  std::string dump = fmt::format("invariant violated at t={}: {}\nrecent events:", now_, what);
  const size_t n = std::min(ring_next_, kRingSize);
  for (size_t i = ring_next_ - n; i < ring_next_; ++i) {
    const TraceEntry& e = ring_[i % kRingSize];
    dump += fmt::format("\n  t={} {} a={} b={}", e.time, EventName(static_cast<int>(e.kind)),
                        e.a, e.b);
  }
  Fail(ErrorCode::kInvariant, dump);
}

void VirtualFabric::CheckCredit(const ConnState& c) {
  ++stats_.flow_control_checks;
  if (c.credit.outstanding() > c.credit.granted() || !c.credit.Consistent()) {
    Violation(fmt::format("conn {}: outstanding {} > granted {} (available {}, pending {}, "
                          "in transit {})",
                          c.spec.id.value, c.credit.outstanding(), c.credit.granted(),
                          c.credit.available(), c.credit.replenish_pending(),
                          c.credit.in_transit()));
  }
  if (c.task_queue > params_.queue_capacity) {
    Violation(fmt::format("conn {}: task queue {} exceeds capacity {}", c.spec.id.value,
                          c.task_queue, params_.queue_capacity));
  }
}

void VirtualFabric::Submit(Subrequest request) {
  auto it = peer_conns_.find(request.peer);
  if (it == peer_conns_.end()) {
    Fail(ErrorCode::kArgument, fmt::format("no connection to server {}", request.peer.value));
  }
  size_t& cursor = peer_cursor_[request.peer];
  const ConnId conn = it->second[cursor % it->second.size()];
  ++cursor;
  SubmitOn(conn, std::move(request));
}

uint64_t VirtualFabric::SubmitOn(ConnId conn_id, Subrequest request) {
  ConnState& c = conns_.at(conn_id.value);
  if (c.spec.priority != Priority::kNormal) {
    Fail(ErrorCode::kArgument, "subrequests cannot be posted on a credit channel");
  }
  if (c.spec.peer != request.peer) {
    Fail(ErrorCode::kArgument, fmt::format("conn {} does not lead to server {}",
                                           conn_id.value, request.peer.value));
  }
  RequestState rs;
  rs.bytes = MeasureSubrequest(params_.sizes, deployment_, request);
  rs.req = std::move(request);
  rs.conn = conn_id;
  rs.submitted = now_;
  requests_.push_back(std::move(rs));

  Msg m;
  m.kind = MsgKind::kRequest;
  m.conn = conn_id;
  m.seq = c.next_seq++;
  m.bytes = requests_.back().bytes.request;
  m.request = requests_.size() - 1;
  // The request is built now, so it carries whatever has been freed so far.
  CreditAnnotation note;
  if (GrantAndPiggyback(c.credit, note) > 0) {
    m.grants.push_back(Grant{conn_id, note.grant, c.free_time_sum});
    c.free_time_sum = 0;
    stats_.piggybacked_credits += note.grant;
  }
  msgs_.push_back(std::move(m));

  ++stats_.submitted;
  if (stats_.first_submit < 0) stats_.first_submit = now_;
  stats_.request_bytes += m.bytes;
  Note(EventKind::kSubmit, conn_id.value, m.seq);
  Enqueue(msgs_.size() - 1);
  ArmSampler();
  return m.seq;
}

void VirtualFabric::Enqueue(uint64_t msg_id) {
  ConnState& c = conns_.at(msgs_[msg_id].conn.value);
  if (c.migrating) {
    // Buffer bounded by the credit total; the rest is held back in order.
    if (c.quiesce_buffer.size() < params_.queue_capacity) {
      c.quiesce_buffer.push_back(msg_id);
    } else {
      c.holdback.push_back(msg_id);
    }
    ++stats_.migration_buffered;
    return;
  }
  PushToEngine(msg_id);
  StartNext(c.engine);
}

void VirtualFabric::PushToEngine(uint64_t msg_id) {
  Msg& m = msgs_[msg_id];
  ConnState& c = conns_.at(m.conn.value);
  m.priority = c.spec.priority;
  EngineCtx& e = engines_.at(c.engine.value);
  (m.priority == Priority::kHigh ? e.high : e.normal).push_back(msg_id);
  ++c.queued;
}

void VirtualFabric::StartNext(EngineId engine) {
  EngineCtx& e = engines_.at(engine.value);
  if (e.state != EngineState::kIdle) return;
  std::deque<uint64_t>& q = !e.high.empty() ? e.high : e.normal;
  if (q.empty()) return;
  const uint64_t msg_id = q.front();
  q.pop_front();
  ConnState& c = conns_.at(msgs_[msg_id].conn.value);
  --c.queued;
  c.in_service = true;
  e.current = msg_id;
  UnitCtx& unit = units_.at(Topology::UnitOf(c.domain).value);
  if (unit.busy) {
    e.state = EngineState::kWaitingUnit;
    (msgs_[msg_id].priority == Priority::kHigh ? unit.waiters_high : unit.waiters_normal)
        .push_back(engine);
    return;
  }
  BeginPost(engine);
}

void VirtualFabric::BeginPost(EngineId engine) {
  EngineCtx& e = engines_.at(engine.value);
  Msg& m = msgs_[e.current];
  ConnState& c = conns_.at(m.conn.value);
  const UnitId unit = Topology::UnitOf(c.domain);
  units_[unit.value].busy = true;
  e.state = EngineState::kPosting;
  Tick cost = params_.base_service_time;
  if (UnitShared(unit)) {
    cost += params_.lock_overhead;
    ++stats_.shared_unit_posts;
  }
  if (m.kind == MsgKind::kCredit) {
    // Credit messages are built when posted, so they pick up late frees too.
    for (ConnId id : m.credit_conns) {
      ConnState& owner_conn = conns_.at(id.value);
      const uint32_t n = owner_conn.credit.TakeReplenish();
      if (n > 0) m.grants.push_back(Grant{id, n, owner_conn.free_time_sum});
      owner_conn.free_time_sum = 0;
      owner_conn.open_credit.reset();
    }
    auto open = open_fast_.find(c.spec.peer);
    if (open != open_fast_.end() && open->second == e.current) open_fast_.erase(open);
  }
  Note(EventKind::kPostStart, m.conn.value, m.seq);
  if (post_log_enabled_) {
    post_log_.push_back(PostRecord{m.conn, m.seq, m.kind == MsgKind::kCredit, engine, unit, now_,
                                   now_ + cost});
  }
  Schedule(now_ + cost, [this, engine] { PostDone(engine); });
}

void VirtualFabric::PostDone(EngineId engine) {
  EngineCtx& e = engines_.at(engine.value);
  const uint64_t msg_id = e.current;
  Msg& m = msgs_[msg_id];
  ConnState& c = conns_.at(m.conn.value);
  Note(EventKind::kPostDone, m.conn.value, m.seq);

  ++stats_.fifo_checks;
  if (m.seq != c.next_post_seq) {
    Violation(fmt::format("conn {}: posted seq {} but expected {}", m.conn.value, m.seq,
                          c.next_post_seq));
  }
  ++c.next_post_seq;
  c.in_service = false;

  UnitCtx& unit = units_.at(Topology::UnitOf(c.domain).value);
  unit.busy = false;
  std::deque<EngineId>& waiters = !unit.waiters_high.empty() ? unit.waiters_high
                                                              : unit.waiters_normal;
  if (!waiters.empty()) {
    const EngineId next = waiters.front();
    waiters.pop_front();
    BeginPost(next);
  }

  if (m.kind == MsgKind::kRequest) {
    ++stats_.posted;
    stats_.last_post = now_;
    requests_[m.request].posted = now_;
  }
  const Tick arrival = std::max(now_ + params_.propagation_delay + TransferTime(m.bytes),
                                c.last_arrival);
  c.last_arrival = arrival;
  Schedule(arrival, [this, msg_id] { ServerArrive(msg_id); });

  if (c.migrating && c.detach_pending) Detach(c.spec.id);

  e.state = EngineState::kIdle;
  StartNext(engine);
}

void VirtualFabric::ServerArrive(uint64_t msg_id) {
  const Msg& m = msgs_[msg_id];
  Note(EventKind::kServerArrive, m.conn.value, m.seq);
  // Grants are applied before anything else the message triggers.
  for (const Grant& g : m.grants) DeliverCredits(g);
  if (m.kind != MsgKind::kRequest) return;
  const ServerId peer = conns_.at(m.conn.value).spec.peer;
  servers_.at(peer).queue.push_back(msg_id);
  TryServe(peer);
}

void VirtualFabric::TryServe(ServerId server) {
  ServerCtx& s = servers_.at(server);
  while (s.free_slots > 0 && !s.queue.empty()) {
    const uint64_t msg_id = s.queue.front();
    s.queue.pop_front();
    --s.free_slots;
    const RequestState& rs = requests_[msgs_[msg_id].request];
    Tick cost = params_.server_task_cost;
    if (rs.req.slices.empty()) {
      cost += static_cast<Tick>(rs.req.synthetic_rows) * params_.server_raw_row_cost;
    } else {
      for (const auto& sl : rs.req.slices) {
        cost += static_cast<Tick>(sl.indices.size()) *
                (sl.mode == FetchMode::kPushdown ? params_.server_pool_row_cost
                                                 : params_.server_raw_row_cost);
      }
    }
    Schedule(now_ + cost, [this, server, msg_id] { ServerDone(server, msg_id); });
  }
}

void VirtualFabric::ServerDone(ServerId server, uint64_t msg_id) {
  ServerCtx& s = servers_.at(server);
  ++s.free_slots;
  const Msg& m = msgs_[msg_id];
  RequestState& rs = requests_[m.request];
  Note(EventKind::kServerDone, m.conn.value, m.seq);
  if (!rs.req.slices.empty() && deployment_ != nullptr) {
    rs.reply = ExecuteOnServer(*deployment_, server, rs.req.slices);
  }
  ConnState& c = conns_.at(m.conn.value);
  c.responses.push_back(m.request);
  TrySend(c.spec.id);
  TryServe(server);
}

void VirtualFabric::TrySend(ConnId conn_id) {
  ConnState& c = conns_.at(conn_id.value);
  while (!c.responses.empty() && c.credit.TrySend()) {
    const size_t request = c.responses.front();
    c.responses.pop_front();
    CheckCredit(c);
    const uint64_t bytes = requests_[request].bytes.response;
    const Tick start = std::max(now_, link_free_);
    link_free_ = start + TransferTime(bytes);
    Note(EventKind::kResponseSent, conn_id.value, request);
    Schedule(link_free_ + params_.propagation_delay, [this, request] { RankerArrive(request); });
  }
  if (!c.responses.empty() && c.credit.available() == 0 && c.stalled_since < 0) {
    c.stalled_since = now_;
    ++stats_.credit_stall_events;
  }
}

void VirtualFabric::RankerArrive(size_t request) {
  ConnState& c = conns_.at(requests_[request].conn.value);
  Note(EventKind::kRankerArrive, c.spec.id.value, request);
  ++c.task_queue;
  stats_.max_task_queue = std::max<uint64_t>(stats_.max_task_queue, c.task_queue);
  CheckCredit(c);
  arrivals_.push_back(request);
  TryConsume();
}

void VirtualFabric::TryConsume() {
  while (free_workers_ > 0 && !arrivals_.empty()) {
    const size_t request = arrivals_.front();
    arrivals_.pop_front();
    --free_workers_;
    const auto payload = static_cast<double>(requests_[request].bytes.payload);
    const Tick cost = params_.ranker_response_cost +
                      static_cast<Tick>(std::ceil(payload / params_.ranker_bytes_per_ns));
    Schedule(now_ + cost, [this, request] { Consumed(request); });
  }
}

void VirtualFabric::Consumed(size_t request) {
  ++free_workers_;
  RequestState& rs = requests_[request];
  ConnState& c = conns_.at(rs.conn.value);
  Note(EventKind::kConsumed, rs.conn.value, request);
  --c.task_queue;
  c.credit.OnConsumed();
  c.free_time_sum += static_cast<double>(now_);
  CheckCredit(c);

  Completion done;
  done.tag = rs.req.tag;
  done.peer = rs.req.peer;
  done.conn = rs.conn;
  done.slices = std::move(rs.reply);
  done.submitted_at = rs.submitted;
  done.posted_at = rs.posted;
  done.completed_at = now_;
  done.request_bytes = rs.bytes.request;
  done.response_bytes = rs.bytes.response;
  done.payload_bytes = rs.bytes.payload;
  rs.req.slices.clear();
  rs.req.slices.shrink_to_fit();
  ready_.push_back(std::move(done));

  ++stats_.completed;
  stats_.last_completion = now_;
  stats_.response_bytes += rs.bytes.response;
  stats_.payload_bytes += rs.bytes.payload;

  OnCreditFreed(rs.conn);
  TryConsume();
}

void VirtualFabric::OnCreditFreed(ConnId conn_id) {
  ConnState& c = conns_.at(conn_id.value);
  if (c.open_credit) return;  // an unposted credit message will pick it up
  if (c.grace_armed) return;
  c.grace_armed = true;
  Schedule(now_ + params_.credit_grace, [this, conn_id] {
    ConnState& cc = conns_.at(conn_id.value);
    cc.grace_armed = false;
    if (cc.credit.replenish_pending() > 0 && !cc.open_credit) {
      SendCreditMessage(conn_id, params_.credit_mode == CreditMode::kFastChannel);
    }
  });
}

void VirtualFabric::SendCreditMessage(ConnId data_conn, bool fast) {
  ConnState& owner_conn = conns_.at(data_conn.value);
  const ServerId peer = owner_conn.spec.peer;
  if (fast) {
    // One unposted fast message per peer collects every waiting connection.
    auto open = open_fast_.find(peer);
    if (open != open_fast_.end()) {
      msgs_[open->second].credit_conns.push_back(data_conn);
      owner_conn.open_credit = open->second;
      return;
    }
  }
  ConnId carrier = data_conn;
  if (fast) {
    auto it = credit_channel_.find(peer);
    if (it == credit_channel_.end()) Fail(ErrorCode::kInternal, "missing credit channel");
    carrier = it->second;
  }
  ConnState& cc = conns_.at(carrier.value);
  Msg m;
  m.kind = MsgKind::kCredit;
  m.conn = carrier;
  m.seq = cc.next_seq++;
  m.credit_conns.push_back(data_conn);
  m.bytes = params_.sizes.CreditMessageBytes();
  msgs_.push_back(std::move(m));
  const uint64_t id = msgs_.size() - 1;
  owner_conn.open_credit = id;
  if (fast) open_fast_[peer] = id;
  ++stats_.credit_messages;
  if (fast) ++stats_.fast_credit_messages;
  Note(EventKind::kCreditSend, data_conn.value, carrier.value);
  Enqueue(id);
}

void VirtualFabric::SendCreditFast(ConnId data_conn) {
  ConnState& c = conns_.at(data_conn.value);
  if (c.open_credit) return;
  SendCreditMessage(data_conn, true);
}

void VirtualFabric::DeliverCredits(const Grant& g) {
  ConnState& c = conns_.at(g.conn.value);
  c.credit.OnGrantDelivered(g.credits);
  stats_.credits_delivered += g.credits;
  stats_.credit_latency_sum +=
      static_cast<double>(g.credits) * static_cast<double>(now_) - g.free_time_sum;
  Note(EventKind::kCreditDelivered, g.conn.value, g.credits);
  CheckCredit(c);
  if (c.stalled_since >= 0) {
    stats_.credit_stall_time += now_ - c.stalled_since;
    c.stalled_since = -1;
  }
  TrySend(g.conn);
}

MigrationReport VirtualFabric::Migrate(ConnId conn_id, EngineId to) {
  ConnState& c = conns_.at(conn_id.value);
  if (to.value >= engines_.size()) {
    Fail(ErrorCode::kArgument, fmt::format("no engine {}", to.value));
  }
  MigrationReport report{conn_id, c.engine, to, c.domain, c.domain, false};
  if (to == c.engine || c.migrating) {
    report.no_op = true;
    return report;
  }
  if (c.spec.priority != Priority::kNormal) {
    Fail(ErrorCode::kArgument, "credit channels are pinned to their engine");
  }
  if (!engines_[to.value].home) {
    Fail(ErrorCode::kArgument, fmt::format("engine {} owns no resource domain", to.value));
  }
  report.new_domain = *engines_[to.value].home;
  Note(EventKind::kMigrateStart, conn_id.value, to.value);
  c.migrating = true;
  c.migrate_to = to;
  if (c.in_service) {
    c.detach_pending = true;  // wait for the in-flight post
  } else {
    Detach(conn_id);
  }
  return report;
}

void VirtualFabric::Detach(ConnId conn_id) {
  ConnState& c = conns_.at(conn_id.value);
  c.detach_pending = false;
  EngineCtx& old = engines_.at(c.engine.value);
  std::deque<uint64_t> keep;
  for (uint64_t id : old.normal) {
    if (msgs_[id].conn == conn_id) {
      c.moving.push_back(id);
    } else {
      keep.push_back(id);
    }
  }
  old.normal.swap(keep);
  c.queued -= c.moving.size();
  Schedule(now_ + params_.migration_cost, [this, conn_id] { Attach(conn_id); });
}

void VirtualFabric::Attach(ConnId conn_id) {
  ConnState& c = conns_.at(conn_id.value);
  const EngineId from = c.engine;
  c.engine = c.migrate_to;
  c.domain = *engines_.at(c.engine.value).home;
  c.migrating = false;
  RecomputeSharing();
  for (auto* q : {&c.moving, &c.quiesce_buffer, &c.holdback}) {
    for (uint64_t id : *q) PushToEngine(id);
    q->clear();
  }
  ++stats_.migrations;
  Note(EventKind::kMigrateDone, conn_id.value, c.engine.value);
  StartNext(c.engine);
  StartNext(from);
}

void VirtualFabric::ArmSampler() {
  if (sampler_armed_) return;
  const Tick period = params_.effective_sample_period();
  sampler_armed_ = true;
  Schedule((now_ / period + 1) * period, [this] { Sample(); });
}

void VirtualFabric::Sample() {
  sampler_armed_ = false;
  Note(EventKind::kSample, 0);
  std::vector<uint64_t> backlog(engines_.size());
  uint64_t hi = 0;
  uint64_t lo = UINT64_MAX;
  for (size_t e = 0; e < engines_.size(); ++e) {
    backlog[e] = EngineBacklog(EngineId(static_cast<uint32_t>(e)));
    if (!engines_[e].home) continue;
    hi = std::max(hi, backlog[e]);
    lo = std::min(lo, backlog[e]);
  }
  stats_.sample_times.push_back(now_);
  stats_.imbalance_sum += static_cast<double>(hi - std::min(hi, lo));
  stats_.engine_backlogs.push_back(std::move(backlog));

  if (params_.rebalance) {
    std::vector<EngineLoad> loads(engines_.size());
    for (size_t e = 0; e < engines_.size(); ++e) {
      loads[e].engine = EngineId(static_cast<uint32_t>(e));
      loads[e].can_receive = engines_[e].home.has_value();
    }
    for (const auto& c : conns_) {
      if (c.spec.priority != Priority::kNormal || c.migrating) continue;
      loads[c.engine.value].conns.push_back(ConnLoad{c.spec.id, c.queued});
    }
    for (const auto& p : RebalanceTick(loads, params_.rebalance_policy)) Migrate(p.conn, p.to);
  }
  if (Outstanding() > 0) ArmSampler();
}

std::vector<Completion> VirtualFabric::WaitCompletions() {
  while (ready_.empty() && Step()) {
  }
  if (ready_.empty() && Outstanding() > 0) {
    Violation(fmt::format("{} subrequests outstanding with no pending events", Outstanding()));
  }
  std::vector<Completion> out;
  out.swap(ready_);
  return out;
}

void VirtualFabric::AdvanceTo(Tick t) {
  while (!events_.empty() && events_.top().time <= t) Step();
  now_ = std::max(now_, t);
}

void VirtualFabric::RunToQuiescence() {
  while (Step()) {
  }
  if (Outstanding() > 0) {
    Violation(fmt::format("{} subrequests never completed", Outstanding()));
  }
}

}  // namespace embserve
