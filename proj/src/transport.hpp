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
#include <span>
#include <vector>

#include "ids.hpp"

namespace embserve {

enum class Priority { kNormal, kHigh };

struct ConnectionSpec {
  ConnId id;
  ServerId peer;
  DomainId domain;
  Priority priority = Priority::kNormal;
};

// Connections and the resource domain each was allocated. Domain d wraps
// parallelism unit d for the life of the deployment.
struct Topology {
  uint32_t num_units = 0;
  std::vector<ConnectionSpec> connections;

  static UnitId UnitOf(DomainId domain) { return UnitId(domain.value); }
  const ConnectionSpec& connection(ConnId id) const { return connections.at(id.value); }
  // unit -> connection ids allocated to it, ascending.
  std::vector<std::vector<ConnId>> UnitMapping() const;
};

// Connection i is created towards peers[i] and allocated domain i mod
// num_units. Throws Error(kConfig) when there are no peers or units.
Topology CreateConnections(uint32_t num_units, std::span<const ServerId> peers);

// Appends one high-priority credit connection per distinct peer. Domains
// continue the round-robin sequence.
void AddCreditChannels(Topology& topology, std::span<const ServerId> peers);

// Peer list for `num_connections` connections created one per server in
// turn: connection i goes to servers[i mod servers.size()].
std::vector<ServerId> InterleavedPeers(std::span<const ServerId> servers,
                                       uint32_t num_connections);

struct Assignment {
  uint32_t num_engines = 0;
  std::vector<EngineId> owner;  // indexed by connection id

  std::vector<ConnId> Owned(EngineId engine) const;
};

// Deals connections to engines in contiguous blocks of connection ids,
// ignoring resource domains.
Assignment AssignNaive(const Topology& topology, uint32_t num_engines);

// Keeps every resource domain inside one engine. Domains are handed out in
// ascending order to the engine with the fewest connections so far.
Assignment AssignMappingAware(const Topology& topology, uint32_t num_engines);

// Number of distinct engines holding a connection mapped to each unit.
std::vector<uint32_t> EnginesPerUnit(const Topology& topology, const Assignment& assignment);
bool AnyUnitShared(const Topology& topology, const Assignment& assignment);

struct ConnLoad {
  ConnId conn;
  uint64_t backlog = 0;
};

struct EngineLoad {
  EngineId engine;
  // Engines without a resource domain of their own cannot receive
  // connections.
  bool can_receive = true;
  std::vector<ConnLoad> conns;

  uint64_t backlog() const;
};

struct RebalancePolicy {
  Tick period = 5000;
  double imbalance_factor = 4.0;
  uint32_t max_migrations_per_tick = 1;
};

struct MigrationProposal {
  ConnId conn;
  EngineId from;
  EngineId to;
};

// While the busiest engine's backlog exceeds imbalance_factor times the
// least busy one's, move the busiest connection whose move strictly narrows
// the gap. At most max_migrations_per_tick proposals.
std::vector<MigrationProposal> RebalanceTick(std::span<const EngineLoad> engines,
                                             const RebalancePolicy& policy);

// Per-connection credit accounting. `granted` equals the ranker task-queue
// capacity for the connection and is conserved:
//   available + outstanding + replenish_pending + in_transit == granted.
class CreditState {
 public:
  explicit CreditState(uint32_t granted = 0) : granted_(granted), available_(granted) {}

  uint32_t granted() const { return granted_; }
  uint32_t available() const { return available_; }
  uint32_t outstanding() const { return outstanding_; }
  uint32_t replenish_pending() const { return replenish_pending_; }
  uint32_t in_transit() const { return in_transit_; }

  // Server side: spend one credit to send a response. False if none left.
  bool TrySend();
  // Ranker side: a queued response was consumed, freeing its slot.
  void OnConsumed();
  // Ranker side: move every freed credit onto an outgoing message.
  uint32_t TakeReplenish();
  // Server side: a grant arrived.
  void OnGrantDelivered(uint32_t n);

  bool Consistent() const;

 private:
  uint32_t granted_;
  uint32_t available_;
  uint32_t outstanding_ = 0;
  uint32_t replenish_pending_ = 0;
  uint32_t in_transit_ = 0;
};

struct CreditAnnotation {
  uint32_t grant = 0;
};

// Attaches every credit freed since the last send to an outgoing request.
uint32_t GrantAndPiggyback(CreditState& credit, CreditAnnotation& request);

}  // namespace embserve
