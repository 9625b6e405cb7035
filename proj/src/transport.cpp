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

#include "transport.hpp"

#include <algorithm>
#include <set>

#include "error.hpp"

namespace embserve {

std::vector<std::vector<ConnId>> Topology::UnitMapping() const {
  std::vector<std::vector<ConnId>> out(num_units);
  for (const auto& c : connections) out[UnitOf(c.domain).value].push_back(c.id);
  return out;
}

Topology CreateConnections(uint32_t num_units, std::span<const ServerId> peers) {
  if (num_units < 1) Fail(ErrorCode::kConfig, "transport.num_units: must be >= 1");
  if (peers.empty()) Fail(ErrorCode::kConfig, "transport: no peers to connect to");
  Topology t;
  t.num_units = num_units;
  t.connections.reserve(peers.size());
  for (uint32_t i = 0; i < peers.size(); ++i) {
    t.connections.push_back(
        ConnectionSpec{ConnId(i), peers[i], DomainId(i % num_units), Priority::kNormal});
  }
  return t;
}

void AddCreditChannels(Topology& topology, std::span<const ServerId> peers) {
  std::set<ServerId> seen;
  for (ServerId p : peers) {
    if (!seen.insert(p).second) continue;
    const auto i = static_cast<uint32_t>(topology.connections.size());
    topology.connections.push_back(
        ConnectionSpec{ConnId(i), p, DomainId(i % topology.num_units), Priority::kHigh});
  }
}

std::vector<ServerId> InterleavedPeers(std::span<const ServerId> servers,
                                       uint32_t num_connections) {
  if (servers.empty()) Fail(ErrorCode::kConfig, "transport: no peers to connect to");
  std::vector<ServerId> out;
  out.reserve(num_connections);
  for (uint32_t i = 0; i < num_connections; ++i) out.push_back(servers[i % servers.size()]);
  return out;
}

std::vector<ConnId> Assignment::Owned(EngineId engine) const {
  std::vector<ConnId> out;
  for (uint32_t i = 0; i < owner.size(); ++i) {
    if (owner[i] == engine) out.push_back(ConnId(i));
  }
  return out;
}

Assignment AssignNaive(const Topology& topology, uint32_t num_engines) {
  if (num_engines < 1) Fail(ErrorCode::kConfig, "transport.num_engines: must be >= 1");
  Assignment a;
  a.num_engines = num_engines;
  const uint64_t n = topology.connections.size();
  a.owner.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    a.owner.push_back(EngineId(static_cast<uint32_t>(i * num_engines / n)));
  }
  return a;
}

Assignment AssignMappingAware(const Topology& topology, uint32_t num_engines) {
  if (num_engines < 1) Fail(ErrorCode::kConfig, "transport.num_engines: must be >= 1");
  Assignment a;
  a.num_engines = num_engines;
  a.owner.resize(topology.connections.size());
  const auto mapping = topology.UnitMapping();
  std::vector<uint64_t> load(num_engines, 0);
  for (const auto& conns : mapping) {
    if (conns.empty()) continue;
    const auto target = static_cast<uint32_t>(
        std::min_element(load.begin(), load.end()) - load.begin());
    for (ConnId c : conns) a.owner[c.value] = EngineId(target);
    load[target] += conns.size();
  }
  return a;
}

std::vector<uint32_t> EnginesPerUnit(const Topology& topology, const Assignment& assignment) {
  std::vector<std::set<EngineId>> engines(topology.num_units);
  for (const auto& c : topology.connections) {
    engines[Topology::UnitOf(c.domain).value].insert(assignment.owner.at(c.id.value));
  }
  std::vector<uint32_t> out;
  out.reserve(engines.size());
  for (const auto& s : engines) out.push_back(static_cast<uint32_t>(s.size()));
  return out;
}

bool AnyUnitShared(const Topology& topology, const Assignment& assignment) {
  const auto counts = EnginesPerUnit(topology, assignment);
  return std::any_of(counts.begin(), counts.end(), [](uint32_t n) { return n >= 2; });
}

uint64_t EngineLoad::backlog() const {
  uint64_t b = 0;
  for (const auto& c : conns) b += c.backlog;
  return b;
}

std::vector<MigrationProposal> RebalanceTick(std::span<const EngineLoad> engines,
                                             const RebalancePolicy& policy) {
  std::vector<EngineLoad> loads(engines.begin(), engines.end());
  std::vector<MigrationProposal> out;
  while (out.size() < policy.max_migrations_per_tick && loads.size() >= 2) {
    size_t hi = 0;
    for (size_t i = 1; i < loads.size(); ++i) {
      if (loads[i].backlog() > loads[hi].backlog()) hi = i;
    }
    size_t lo = loads.size();
    for (size_t i = 0; i < loads.size(); ++i) {
      if (i == hi || !loads[i].can_receive) continue;
      if (lo == loads.size() || loads[i].backlog() < loads[lo].backlog()) lo = i;
    }
    if (lo == loads.size()) break;
    const uint64_t max_b = loads[hi].backlog();
    const uint64_t min_b = loads[lo].backlog();
    if (!(static_cast<double>(max_b) > policy.imbalance_factor * static_cast<double>(min_b))) {
      break;
    }
    const uint64_t gap = max_b - min_b;
    auto& src = loads[hi].conns;
    auto best = src.end();
    for (auto it = src.begin(); it != src.end(); ++it) {
      if (it->backlog == 0 || it->backlog >= gap) continue;
      if (best == src.end() || it->backlog > best->backlog) best = it;
    }
    if (best == src.end()) break;
    out.push_back(MigrationProposal{best->conn, loads[hi].engine, loads[lo].engine});
    loads[lo].conns.push_back(*best);
    src.erase(best);
  }
  return out;
}

bool CreditState::TrySend() {
  if (available_ == 0) return false;
  --available_;
  ++outstanding_;
  return true;
}

void CreditState::OnConsumed() {
  if (outstanding_ == 0) Fail(ErrorCode::kInvariant, "credit: consumed with nothing outstanding");
  --outstanding_;
  ++replenish_pending_;
}

uint32_t CreditState::TakeReplenish() {
  const uint32_t n = replenish_pending_;
  replenish_pending_ = 0;
  in_transit_ += n;
  return n;
}

void CreditState::OnGrantDelivered(uint32_t n) {
  if (n > in_transit_) Fail(ErrorCode::kInvariant, "credit: grant exceeds credits in transit");
  in_transit_ -= n;
  available_ += n;
}

bool CreditState::Consistent() const {
  return outstanding_ <= granted_ &&
         uint64_t{available_} + outstanding_ + replenish_pending_ + in_transit_ == granted_;
}

uint32_t GrantAndPiggyback(CreditState& credit, CreditAnnotation& request) {
  const uint32_t n = credit.TakeReplenish();
  request.grant += n;
  return n;
}

}  // namespace embserve
