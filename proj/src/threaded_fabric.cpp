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

#include "threaded_fabric.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "error.hpp"

namespace embserve {

ThreadedFabric::ThreadedFabric(const TransportParams& params, const Deployment* deployment,
                               std::vector<ServerId> peers)
    : params_(params), deployment_(deployment), start_(std::chrono::steady_clock::now()) {
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
  const Assignment assignment = params_.assignment == AssignmentPolicy::kMappingAware
                                    ? AssignMappingAware(topology_, params_.num_engines)
                                    : AssignNaive(topology_, params_.num_engines);
  engines_per_unit_ = EnginesPerUnit(topology_, assignment);
  for (const auto& spec : topology_.connections) {
    conns_.push_back(Conn{spec, assignment.owner[spec.id.value], 0, 0, params_.queue_capacity});
    peer_conns_[spec.peer].push_back(spec.id);
  }
  for (uint32_t e = 0; e < params_.num_engines; ++e) {
    engines_.push_back(std::make_unique<Engine>());
  }
  for (uint32_t u = 0; u < params_.num_units; ++u) {
    units_.push_back(std::make_unique<std::mutex>());
  }
  for (uint32_t e = 0; e < params_.num_engines; ++e) {
    threads_.emplace_back([this, e] { EngineLoop(EngineId(e)); });
  }
  for (uint32_t w = 0; w < params_.cpu_budget; ++w) {
    threads_.emplace_back([this] { ServerLoop(); });
  }
}

ThreadedFabric::~ThreadedFabric() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  for (auto& e : engines_) {
    std::lock_guard lock(e->mu);
    e->cv.notify_all();
  }
  server_cv_.notify_all();
  done_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

Tick ThreadedFabric::Now() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now() - start_)
      .count();
}

void ThreadedFabric::Spin(Tick ns) const {
  const auto until = std::chrono::steady_clock::now() + std::chrono::nanoseconds(ns);
  while (std::chrono::steady_clock::now() < until) {
  }
}

uint64_t ThreadedFabric::Outstanding() const {
  std::lock_guard lock(mu_);
  return stats_.submitted - stats_.completed;
}

TransportStats ThreadedFabric::Stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void ThreadedFabric::Submit(Subrequest request) {
  auto it = peer_conns_.find(request.peer);
  if (it == peer_conns_.end()) {
    Fail(ErrorCode::kArgument, fmt::format("no connection to server {}", request.peer.value));
  }
  size_t& cursor = peer_cursor_[request.peer];
  const ConnId conn = it->second[cursor % it->second.size()];
  ++cursor;

  Job job;
  job.conn = conn;
  job.seq = conns_[conn.value].next_seq++;
  job.bytes = MeasureSubrequest(params_.sizes, deployment_, request);
  job.req = std::move(request);
  job.submitted = Now();
  {
    std::lock_guard lock(mu_);
    ++stats_.submitted;
    if (stats_.first_submit < 0) stats_.first_submit = job.submitted;
    stats_.request_bytes += job.bytes.request;
  }
  Engine& e = *engines_[conns_[conn.value].engine.value];
  {
    std::lock_guard lock(e.mu);
    e.queue.push_back(std::move(job));
  }
  e.cv.notify_one();
}

void ThreadedFabric::EngineLoop(EngineId engine) {
  Engine& e = *engines_[engine.value];
  for (;;) {
    Job job;
    {
      std::unique_lock lock(e.mu);
      e.cv.wait(lock, [&] {
        std::lock_guard g(mu_);
        return stop_ || !e.queue.empty();
      });
      if (e.queue.empty()) return;
      job = std::move(e.queue.front());
      e.queue.pop_front();
    }
    Conn& c = conns_[job.conn.value];
    const uint32_t unit = Topology::UnitOf(c.spec.domain).value;
    const bool shared = engines_per_unit_[unit] >= 2;
    {
      std::lock_guard unit_lock(*units_[unit]);
      Spin(params_.base_service_time + (shared ? params_.lock_overhead : 0));
    }
    job.posted = Now();
    std::lock_guard lock(mu_);
    ++stats_.fifo_checks;
    if (job.seq != c.next_post) {
      failure_ = std::make_exception_ptr(Error(
          ErrorCode::kInvariant,
          fmt::format("conn {}: posted seq {} but expected {}", c.spec.id.value, job.seq,
                      c.next_post)));
    }
    ++c.next_post;
    ++stats_.posted;
    if (shared) ++stats_.shared_unit_posts;
    stats_.last_post = job.posted;
    posted_.push_back(std::move(job));
    server_cv_.notify_one();
  }
}

void ThreadedFabric::ServerLoop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      server_cv_.wait(lock, [&] { return stop_ || !posted_.empty(); });
      if (posted_.empty()) return;
      job = std::move(posted_.front());
      posted_.pop_front();
    }
    Completion done;
    try {
      if (!job.req.slices.empty() && deployment_ != nullptr) {
        done.slices = ExecuteOnServer(*deployment_, job.req.peer, job.req.slices);
      }
    } catch (...) {
      std::lock_guard lock(mu_);
      failure_ = std::current_exception();
    }
    Tick cost = params_.server_task_cost;
    if (job.req.slices.empty()) {
      cost += static_cast<Tick>(job.req.synthetic_rows) * params_.server_raw_row_cost;
    }
    Spin(cost);
    done.tag = job.req.tag;
    done.peer = job.req.peer;
    done.conn = job.conn;
    done.submitted_at = job.submitted;
    done.posted_at = job.posted;
    done.request_bytes = job.bytes.request;
    done.response_bytes = job.bytes.response;
    done.payload_bytes = job.bytes.payload;

    std::unique_lock lock(mu_);
    Conn& c = conns_[job.conn.value];
    // A response needs a free slot in the ranker's task queue.
    done_cv_.wait(lock, [&] { return stop_ || c.available > 0; });
    if (stop_) return;
    --c.available;
    ++stats_.flow_control_checks;
    const uint64_t queued = params_.queue_capacity - c.available;
    stats_.max_task_queue = std::max<uint64_t>(stats_.max_task_queue, queued);
    done.completed_at = Now();
    ready_.push_back(std::move(done));
    done_cv_.notify_all();
  }
}

void ThreadedFabric::CheckFailure() {
  if (failure_) {
    auto f = failure_;
    failure_ = nullptr;
    std::rethrow_exception(f);
  }
}

std::vector<Completion> ThreadedFabric::WaitCompletions() {
  std::unique_lock lock(mu_);
  CheckFailure();
  done_cv_.wait(lock, [&] {
    return failure_ || !ready_.empty() || stats_.submitted == stats_.completed;
  });
  CheckFailure();
  std::vector<Completion> out;
  out.swap(ready_);
  for (const auto& c : out) {
    ++conns_[c.conn.value].available;
    ++stats_.completed;
    ++stats_.credits_delivered;
    stats_.last_completion = std::max(stats_.last_completion, c.completed_at);
    stats_.response_bytes += c.response_bytes;
    stats_.payload_bytes += c.payload_bytes;
  }
  if (!out.empty()) done_cv_.notify_all();
  return out;
}

}  // namespace embserve
