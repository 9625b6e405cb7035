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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cache.hpp"
#include "fabric.hpp"
#include "lookup.hpp"
#include "pooling.hpp"
#include "routing.hpp"
#include "store.hpp"

namespace embserve {

struct CacheSettings {
  bool enabled = true;
  // Adaptive caches follow the load level; fixed ones keep their budget.
  bool adaptive = true;
  uint64_t initial_bytes = 0;
  MemoryModel memory;
  AdaptivePolicy policy;
  size_t window = 16;
  double low_watermark = 128;
  double high_watermark = 512;
  WindowStatistic statistic = WindowStatistic::kMean;
  bool pooled_entries = false;
  size_t sketch_keys = 1 << 14;
  uint64_t sketch_decay = 1 << 15;
};

struct RankerConfig {
  uint32_t pushdown_threshold = 2;
  CacheSettings cache;
  uint32_t pipeline_depth = 1;
  // Global pooling cost: fixed per batch plus per combined vector.
  Tick aggregation_base_cost = 50;
  Tick aggregation_vector_cost = 2;
};

struct LookupCounters {
  uint64_t cache_hits = 0;
  uint64_t pushdown_groups = 0;
  uint64_t pushdown_rows = 0;
  uint64_t raw_rows = 0;

  uint64_t total_rows() const { return cache_hits + pushdown_rows + raw_rows; }
  LookupCounters& operator+=(const LookupCounters& o);
  bool operator==(const LookupCounters&) const = default;
};

struct LookupResult {
  std::vector<Embedding> pooled;  // one per feature
  LookupCounters counters;
};

struct BatchMetrics {
  uint64_t batch_id = 0;
  uint64_t size = 0;
  Tick start = 0;
  Tick fanout_done = 0;
  Tick end = 0;
  Tick latency = 0;
  uint64_t subrequests = 0;
  LookupCounters counters;
  uint64_t request_bytes = 0;
  uint64_t response_bytes = 0;
  uint64_t payload_bytes = 0;
  LoadLevel load = LoadLevel::kNormal;
  uint64_t cache_budget = 0;       // budget the batch ran with
  uint64_t next_cache_budget = 0;  // decided after the batch
  uint64_t evictions = 0;
  uint64_t admissions = 0;
};

struct BatchOutcome {
  std::vector<LookupResult> results;
  BatchMetrics metrics;
};

// Runs batches through cache probe, routing, pushdown planning, fan-out and
// global pooling.
class Ranker {
 public:
  Ranker(const Deployment& deployment, Fabric& fabric, RankerConfig config);

  BatchOutcome ExecuteBatch(const Batch& batch);
  // Keeps up to pipeline_depth batches in flight. Batches start no earlier
  // than their arrival tick. `sink` receives outcomes in batch order.
  void ExecuteTrace(std::span<const Batch> batches,
                    const std::function<void(const Batch&, BatchOutcome&&)>& sink);
  // Waits for outstanding cache admission fetches.
  void Flush();

  const EmbeddingCache* cache() const { return cache_.get(); }
  const RoutingTable& routing() const { return routing_; }
  const RankerConfig& config() const { return config_; }
  uint64_t admission_fetches() const { return admission_fetches_; }

 private:
  struct Pending;
  struct FeatureParts {
    std::vector<PartialResult> partials;
    std::vector<std::pair<uint32_t, Embedding>> raw;  // (origin, row)
  };

  std::unique_ptr<Pending> Begin(const Batch& batch, uint64_t slot);
  void Absorb(Completion&& done);
  BatchOutcome Finish(Pending& p);
  void PumpUntil(const std::function<bool()>& ready);
  void SubmitAdmissions(const std::vector<CacheKey>& keys);
  void CheckMemory(const Batch& batch);

  const Deployment& deployment_;
  Fabric& fabric_;
  RankerConfig config_;
  RoutingTable routing_;
  std::unique_ptr<EmbeddingCache> cache_;
  std::optional<LoadTracker> tracker_;

  uint64_t next_slot_ = 0;
  std::map<uint64_t, Pending*> in_flight_;
  uint64_t admission_fetches_ = 0;
  uint64_t admissions_outstanding_ = 0;
  std::map<uint64_t, std::vector<CacheKey>> admission_keys_;
};

// Tag layout: slot in the high bits, subrequest index below.
inline constexpr uint64_t kAdmissionSlot = (uint64_t{1} << 32) - 1;

struct EquivalenceReport {
  uint64_t lookups = 0;
  uint64_t features = 0;
  // Largest ElementError and largest absolute difference.
  double max_rel_error = 0;
  double max_abs_error = 0;
  // Location of the worst element.
  uint64_t worst_batch = 0;
  size_t worst_lookup = 0;
  size_t worst_feature = 0;
  bool passed(double rel_tol = 1e-5) const { return max_rel_error <= rel_tol; }
};

// Flat reference for one feature, straight from store contents.
Embedding FlatPool(const Deployment& deployment, const RoutingTable& routing,
                   const Feature& feature);

// Error of `got` against `want`: |got - want| relative to max(|want|, floor)
// where floor is abs_floor / rel_tol, so the check passes when either the
// relative error is within rel_tol or the absolute error within abs_floor.
double ElementError(float got, float want, double rel_tol = 1e-5, double abs_floor = 1e-6);

void AccumulateEquivalence(const Deployment& deployment, const RoutingTable& routing,
                           const Batch& batch, const BatchOutcome& outcome,
                           EquivalenceReport& report);

// Executes every batch and diffs each pooled vector against FlatPool.
EquivalenceReport EndToEndEquivalenceCheck(const Deployment& deployment, Ranker& ranker,
                                           std::span<const Batch> batches);

}  // namespace embserve
