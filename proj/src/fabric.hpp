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
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "ids.hpp"
#include "lookup.hpp"
#include "pooling.hpp"
#include "transport.hpp"

namespace embserve {

class Deployment;

enum class AssignmentPolicy { kNaive, kMappingAware };
enum class CreditMode { kFastChannel, kPiggybackOnly };
enum class Backend { kVirtualTime, kThreaded };

std::string_view AssignmentPolicyName(AssignmentPolicy p);
std::string_view CreditModeName(CreditMode m);
std::string_view BackendName(Backend b);

// Transport calibration. Times are virtual nanoseconds.
struct TransportParams {
  uint32_t num_units = 8;
  uint32_t num_engines = 8;
  uint32_t num_connections = 64;
  AssignmentPolicy assignment = AssignmentPolicy::kMappingAware;

  Tick base_service_time = 100;
  Tick lock_overhead = 200;
  Tick propagation_delay = 1000;
  double link_gbps = 100.0;

  // Ranker task-queue capacity per connection; also the credit total.
  uint32_t queue_capacity = 16;
  CreditMode credit_mode = CreditMode::kFastChannel;
  // How long freed credits wait for a request to ride on.
  Tick credit_grace = 100;

  bool rebalance = false;
  RebalancePolicy rebalance_policy;
  Tick migration_cost = 200;
  // Engine backlog sampling period; 0 means rebalance_policy.period.
  Tick sample_period = 0;

  // Embedding server CPU model.
  uint32_t cpu_budget = 8;
  Tick server_task_cost = 300;
  Tick server_pool_row_cost = 15;
  Tick server_raw_row_cost = 10;

  // Ranker response handling.
  uint32_t ranker_workers = 4;
  Tick ranker_response_cost = 30;
  double ranker_bytes_per_ns = 64.0;

  MessageSizeModel sizes;

  void Validate() const;
  Tick effective_sample_period() const {
    return sample_period > 0 ? sample_period : rebalance_policy.period;
  }
};

struct SliceRequest {
  size_t feature = 0;
  TableId table;
  PoolingOp op = PoolingOp::kSum;
  FetchMode mode = FetchMode::kRawFetch;
  std::vector<RowIndex> indices;
};

struct SliceReply {
  size_t feature = 0;
  FetchMode mode = FetchMode::kRawFetch;
  std::optional<PartialResult> partial;
  std::vector<Embedding> rows;
};

// One fan-out subrequest to one embedding server. Without slices it is a
// synthetic message whose server cost and response size are given directly.
struct Subrequest {
  uint64_t tag = 0;
  ServerId peer;
  std::vector<SliceRequest> slices;
  uint32_t synthetic_rows = 1;
  uint64_t synthetic_response_payload = 0;
};

struct Completion {
  uint64_t tag = 0;
  ServerId peer;
  ConnId conn;
  std::vector<SliceReply> slices;
  Tick submitted_at = 0;
  Tick posted_at = 0;
  Tick completed_at = 0;
  uint64_t request_bytes = 0;
  uint64_t response_bytes = 0;
  uint64_t payload_bytes = 0;
};

struct TransportStats {
  uint64_t submitted = 0;
  uint64_t posted = 0;
  uint64_t completed = 0;
  uint64_t drops = 0;
  uint64_t flow_control_checks = 0;
  uint64_t fifo_checks = 0;
  uint64_t shared_unit_posts = 0;
  uint64_t credit_messages = 0;
  uint64_t fast_credit_messages = 0;
  uint64_t piggybacked_credits = 0;
  uint64_t credits_delivered = 0;
  double credit_latency_sum = 0;
  Tick credit_stall_time = 0;
  uint64_t credit_stall_events = 0;
  uint64_t migrations = 0;
  uint64_t migration_buffered = 0;
  uint64_t max_task_queue = 0;
  uint64_t request_bytes = 0;
  uint64_t response_bytes = 0;
  uint64_t payload_bytes = 0;
  Tick first_submit = -1;
  Tick last_post = 0;
  Tick last_completion = 0;
  // Engine backlog samples on a fixed virtual-time grid.
  std::vector<Tick> sample_times;
  std::vector<std::vector<uint64_t>> engine_backlogs;
  double imbalance_sum = 0;

  double mean_credit_latency() const {
    return credits_delivered == 0 ? 0.0 : credit_latency_sum / static_cast<double>(credits_delivered);
  }
  double mean_imbalance() const {
    return sample_times.empty() ? 0.0 : imbalance_sum / static_cast<double>(sample_times.size());
  }
};

// Carries subrequests from the ranker to embedding servers and their
// responses back. Completions are delivered to the ranker's thread.
class Fabric {
 public:
  virtual ~Fabric() = default;

  virtual void Submit(Subrequest request) = 0;
  // Blocks (or advances virtual time) until at least one completion is
  // available; empty only when nothing is outstanding.
  virtual std::vector<Completion> WaitCompletions() = 0;
  // Virtual time: runs all events up to `t`. Wall-clock backends ignore it.
  virtual void AdvanceTo(Tick t) = 0;
  virtual Tick Now() const = 0;
  virtual uint64_t Outstanding() const = 0;
  virtual TransportStats Stats() const = 0;
  virtual const Topology& topology() const = 0;
  virtual Backend backend() const = 0;
};

// `deployment` may be null when only synthetic subrequests are submitted.
std::unique_ptr<Fabric> MakeFabric(Backend backend, const TransportParams& params,
                                   const Deployment* deployment,
                                   std::vector<ServerId> peers);

// Executes a subrequest against a server's store. Shared by both backends.
std::vector<SliceReply> ExecuteOnServer(const Deployment& deployment, ServerId server,
                                        const std::vector<SliceRequest>& slices);

// Wire bytes of a subrequest and of its response, and the embedding payload
// of the response.
struct SubrequestBytes {
  uint64_t request = 0;
  uint64_t response = 0;
  uint64_t payload = 0;
};
SubrequestBytes MeasureSubrequest(const MessageSizeModel& sizes, const Deployment* deployment,
                                  const Subrequest& request);

}  // namespace embserve
