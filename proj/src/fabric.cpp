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

#include "fabric.hpp"

#include <fmt/format.h>

#include "error.hpp"
#include "sim_fabric.hpp"
#include "store.hpp"
#include "threaded_fabric.hpp"

namespace embserve {

std::string_view AssignmentPolicyName(AssignmentPolicy p) {
  return p == AssignmentPolicy::kNaive ? "naive" : "mapping-aware";
}

std::string_view CreditModeName(CreditMode m) {
  return m == CreditMode::kFastChannel ? "fast-channel" : "piggyback-only";
}

std::string_view BackendName(Backend b) {
  return b == Backend::kVirtualTime ? "virtual" : "threaded";
}

void TransportParams::Validate() const {
  auto need = [](bool ok, const char* field, const char* what) {
    if (!ok) Fail(ErrorCode::kConfig, fmt::format("transport.{}: {}", field, what));
  };
  need(num_units >= 1, "num_units", "must be >= 1");
  need(num_engines >= 1, "num_engines", "must be >= 1");
  need(num_connections >= 1, "num_connections", "must be >= 1");
  need(base_service_time >= 0, "base_service_time", "must be >= 0");
  need(lock_overhead >= 0, "lock_overhead", "must be >= 0");
  need(propagation_delay >= 0, "propagation_delay", "must be >= 0");
  need(link_gbps > 0, "link_gbps", "must be > 0");
  need(queue_capacity >= 1, "queue_capacity", "must be >= 1");
  need(credit_grace >= 0, "credit_grace", "must be >= 0");
  need(migration_cost >= 0, "migration_cost", "must be >= 0");
  need(sample_period >= 0, "sample_period", "must be >= 0");
  need(rebalance_policy.period >= 1, "rebalance_period", "must be >= 1");
  need(rebalance_policy.imbalance_factor >= 1.0, "imbalance_factor", "must be >= 1");
  need(cpu_budget >= 1, "cpu_budget", "must be >= 1");
  need(server_task_cost >= 0 && server_pool_row_cost >= 0 && server_raw_row_cost >= 0,
       "server_task_cost", "server costs must be >= 0");
  need(ranker_workers >= 1, "ranker_workers", "must be >= 1");
  need(ranker_response_cost >= 0, "ranker_response_cost", "must be >= 0");
  need(ranker_bytes_per_ns > 0, "ranker_bytes_per_ns", "must be > 0");
}

std::unique_ptr<Fabric> MakeFabric(Backend backend, const TransportParams& params,
                                   const Deployment* deployment,
                                   std::vector<ServerId> peers) {
  if (backend == Backend::kThreaded) {
    return std::make_unique<ThreadedFabric>(params, deployment, std::move(peers));
  }
  return std::make_unique<VirtualFabric>(params, deployment, std::move(peers));
}

std::vector<SliceReply> ExecuteOnServer(const Deployment& deployment, ServerId server,
                                        const std::vector<SliceRequest>& slices) {
  const ServerStore& store = deployment.server(server);
  std::vector<SliceReply> out;
  out.reserve(slices.size());
  for (const auto& s : slices) {
    SliceReply r;
    r.feature = s.feature;
    r.mode = s.mode;
    if (s.mode == FetchMode::kPushdown) {
      r.partial = store.PartialPool(s.table, s.indices, s.op);
    } else {
      r.rows = store.LookupRows(s.table, s.indices);
    }
    out.push_back(std::move(r));
  }
  return out;
}

SubrequestBytes MeasureSubrequest(const MessageSizeModel& sizes, const Deployment* deployment,
                                  const Subrequest& request) {
  SubrequestBytes b;
  if (request.slices.empty()) {
    b.request = sizes.RequestBytes(std::span<const size_t>{});
    b.payload = request.synthetic_response_payload;
    b.response = sizes.header_bytes + b.payload;
    return b;
  }
  if (deployment == nullptr) {
    Fail(ErrorCode::kArgument, "subrequest slices need a deployment");
  }
  std::vector<size_t> counts;
  counts.reserve(request.slices.size());
  b.response = sizes.header_bytes;
  for (const auto& s : request.slices) {
    counts.push_back(s.indices.size());
    const uint32_t dim = deployment->table(s.table).dim;
    b.payload += MessageSizeModel::SlicePayloadBytes(s.indices.size(), dim, s.mode);
    b.response += sizes.SliceResponseBytes(s.indices.size(), dim, s.mode);
  }
  b.request = sizes.RequestBytes(counts);
  return b;
}

}  // namespace embserve
