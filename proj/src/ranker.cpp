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

#include "ranker.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "error.hpp"

namespace embserve {

LookupCounters& LookupCounters::operator+=(const LookupCounters& o) {
  cache_hits += o.cache_hits;
  pushdown_groups += o.pushdown_groups;
  pushdown_rows += o.pushdown_rows;
  raw_rows += o.raw_rows;
  return *this;
}

struct Ranker::Pending {
  struct Sub {
    size_t lookup = 0;
    DestinationGroup group;
  };
  const Batch* batch = nullptr;
  uint64_t slot = 0;
  BatchMetrics metrics;
  std::vector<LookupResult> results;
  std::vector<std::vector<FeatureParts>> parts;
  std::vector<std::vector<bool>> pooled_hit;  // [lookup][feature]
  std::vector<Sub> subs;
  uint64_t outstanding = 0;
};

namespace {

std::map<TableId, uint64_t> RowBytesByTable(const Deployment& d) {
  std::map<TableId, uint64_t> out;
  for (const auto& t : d.tables()) out[t.id] = t.row_bytes();
  return out;
}

}  // namespace

Ranker::Ranker(const Deployment& deployment, Fabric& fabric, RankerConfig config)
    : deployment_(deployment),
      fabric_(fabric),
      config_(std::move(config)),
      routing_(RoutingTable::Build(deployment.tables(), deployment.placement())) {
  if (config_.pushdown_threshold < 2) {
    Fail(ErrorCode::kConfig, "pooling.pushdown_threshold: must be >= 2");
  }
  if (config_.pipeline_depth < 1) Fail(ErrorCode::kConfig, "ranker.pipeline_depth: must be >= 1");
  const CacheSettings& cs = config_.cache;
  if (cs.memory.gpu_capacity_bytes > 0) cs.memory.Validate();
  tracker_.emplace(cs.window, cs.low_watermark, cs.high_watermark, cs.statistic);
  if (cs.enabled) {
    cache_ = std::make_unique<EmbeddingCache>(cs.initial_bytes, RowBytesByTable(deployment),
                                              cs.sketch_keys, cs.sketch_decay);
  }
}

void Ranker::CheckMemory(const Batch& batch) {
  const MemoryModel& m = config_.cache.memory;
  if (m.gpu_capacity_bytes <= 0) return;
  uint64_t target = 0;
  try {
    target = m.TargetCacheBytes(batch.size());
  } catch (const Error& e) {
    Fail(e.code(), fmt::format("batch {}: {}", batch.id, e.what()));
  }
  if (!cache_ || cache_->budget_bytes() <= target) return;
  if (!config_.cache.adaptive) {
    Fail(ErrorCode::kCapacity,
         fmt::format("batch {}: {} lookups leave {} bytes for the cache but the fixed cache "
                     "holds {}",
                     batch.id, batch.size(), target, cache_->budget_bytes()));
  }
  cache_->Resize(target);
}

std::unique_ptr<Ranker::Pending> Ranker::Begin(const Batch& batch, uint64_t slot) {
  if (batch.lookups.empty()) {
    Fail(ErrorCode::kValidation, fmt::format("batch {}: no lookups", batch.id));
  }
  auto p = std::make_unique<Pending>();
  p->batch = &batch;
  p->slot = slot;
  const uint64_t evictions_before = cache_ ? cache_->evictions() : 0;
  CheckMemory(batch);

  const Tick start = std::max(fabric_.Now(), batch.arrival);
  fabric_.AdvanceTo(start);
  BatchMetrics& m = p->metrics;
  m.batch_id = batch.id;
  m.size = batch.size();
  m.start = fabric_.backend() == Backend::kVirtualTime ? start : fabric_.Now();
  m.fanout_done = m.start;
  m.cache_budget = cache_ ? cache_->budget_bytes() : 0;
  m.evictions = cache_ ? cache_->evictions() - evictions_before : 0;

  p->results.resize(batch.size());
  p->parts.resize(batch.size());
  p->pooled_hit.resize(batch.size());
  for (size_t l = 0; l < batch.size(); ++l) {
    const LookupRequest& lookup = batch.lookups[l];
    auto context = [&](const std::string& what) {
      return fmt::format("batch {} lookup {}: {}", batch.id, l, what);
    };
    if (lookup.features.empty()) Fail(ErrorCode::kValidation, context("no features"));
    LookupResult& result = p->results[l];
    result.pooled.resize(lookup.features.size());
    p->parts[l].resize(lookup.features.size());
    p->pooled_hit[l].assign(lookup.features.size(), false);
    ServedMask served(lookup.features.size());

    for (size_t f = 0; f < lookup.features.size(); ++f) {
      const Feature& feat = lookup.features[f];
      if (feat.indices.empty()) {
        Fail(ErrorCode::kValidation, context(fmt::format("feature {}: no indices", f)));
      }
      served[f].assign(feat.indices.size(), false);
      if (!cache_) continue;
      if (!routing_.has_table(feat.table)) continue;  // reported by GroupByServer
      if (config_.cache.pooled_entries) {
        if (const Embedding* hit =
                cache_->GetPooled(feat.table, PooledCacheKey(feat.table, feat.op, feat.indices))) {
          result.pooled[f] = *hit;
          p->pooled_hit[l][f] = true;
          served[f].assign(feat.indices.size(), true);
          result.counters.cache_hits += feat.indices.size();
          continue;
        }
      }
      const uint64_t rows = routing_.num_rows(feat.table);
      for (size_t i = 0; i < feat.indices.size(); ++i) {
        if (feat.indices[i] >= rows) continue;
        if (const Embedding* hit = cache_->Get(feat.table, feat.indices[i])) {
          p->parts[l][f].raw.emplace_back(static_cast<uint32_t>(i), *hit);
          served[f][i] = true;
          ++result.counters.cache_hits;
        }
      }
    }

    std::vector<DestinationGroup> groups;
    try {
      groups = GroupByServer(routing_, lookup, &served);
    } catch (const Error& e) {
      Fail(e.code(), context(e.what()));
    }
    const PoolingPlan plan = PlanHierarchical(groups, config_.pushdown_threshold);
    for (size_t g = 0; g < groups.size(); ++g) {
      Subrequest req;
      req.tag = (slot << 32) | p->subs.size();
      req.peer = groups[g].server;
      for (size_t s = 0; s < groups[g].slices.size(); ++s) {
        const FeatureSlice& slice = groups[g].slices[s];
        const FetchMode mode = plan.modes[g][s];
        if (mode == FetchMode::kPushdown) {
          ++result.counters.pushdown_groups;
          result.counters.pushdown_rows += slice.indices.size();
        } else {
          result.counters.raw_rows += slice.indices.size();
        }
        req.slices.push_back(SliceRequest{slice.feature, slice.table, slice.op, mode,
                                          slice.indices});
      }
      p->subs.push_back(Pending::Sub{l, std::move(groups[g])});
      ++p->outstanding;
      fabric_.Submit(std::move(req));
    }
    m.counters += result.counters;
  }
  m.subrequests = p->subs.size();
  in_flight_[slot] = p.get();
  return p;
}

void Ranker::Absorb(Completion&& done) {
  const uint64_t slot = done.tag >> 32;
  const size_t index = static_cast<size_t>(done.tag & 0xffffffffu);
  if (slot == kAdmissionSlot) {
    auto it = admission_keys_.find(index);
    if (it == admission_keys_.end()) Fail(ErrorCode::kInternal, "unknown admission fetch");
    size_t k = 0;
    for (auto& reply : done.slices) {
      for (auto& row : reply.rows) cache_->CompleteAdmission(it->second[k++], std::move(row));
    }
    admission_keys_.erase(it);
    --admissions_outstanding_;
    return;
  }
  auto it = in_flight_.find(slot);
  if (it == in_flight_.end()) Fail(ErrorCode::kInternal, "completion for unknown batch");
  Pending& p = *it->second;
  const Pending::Sub& sub = p.subs.at(index);
  if (done.slices.size() != sub.group.slices.size()) {
    Fail(ErrorCode::kInternal,
         fmt::format("batch {}: server {} answered {} of {} slices", p.batch->id,
                     done.peer.value, done.slices.size(), sub.group.slices.size()));
  }
  for (size_t s = 0; s < done.slices.size(); ++s) {
    SliceReply& reply = done.slices[s];
    const FeatureSlice& slice = sub.group.slices[s];
    FeatureParts& parts = p.parts[sub.lookup][slice.feature];
    if (reply.mode == FetchMode::kPushdown) {
      parts.partials.push_back(std::move(*reply.partial));
      continue;
    }
    for (size_t j = 0; j < reply.rows.size(); ++j) {
      if (cache_) cache_->Insert(slice.table, slice.indices[j], reply.rows[j]);
      parts.raw.emplace_back(slice.origins[j], std::move(reply.rows[j]));
    }
  }
  BatchMetrics& m = p.metrics;
  m.request_bytes += done.request_bytes;
  m.response_bytes += done.response_bytes;
  m.payload_bytes += done.payload_bytes;
  m.fanout_done = std::max(m.fanout_done, done.completed_at);
  --p.outstanding;
}

BatchOutcome Ranker::Finish(Pending& p) {
  const Batch& batch = *p.batch;
  uint64_t vectors = 0;
  for (size_t l = 0; l < batch.size(); ++l) {
    const LookupRequest& lookup = batch.lookups[l];
    for (size_t f = 0; f < lookup.features.size(); ++f) {
      if (p.pooled_hit[l][f]) continue;
      FeatureParts& parts = p.parts[l][f];
      std::stable_sort(parts.raw.begin(), parts.raw.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<Embedding> raw;
      raw.reserve(parts.raw.size());
      for (auto& r : parts.raw) raw.push_back(std::move(r.second));
      vectors += parts.partials.size() + raw.size();
      const Feature& feat = lookup.features[f];
      p.results[l].pooled[f] = CombinePartials(parts.partials, raw, feat.op);
      if (cache_ && config_.cache.pooled_entries) {
        cache_->InsertPooled(feat.table, PooledCacheKey(feat.table, feat.op, feat.indices),
                             p.results[l].pooled[f]);
      }
    }
  }
  BatchMetrics& m = p.metrics;
  const Tick aggregation =
      config_.aggregation_base_cost + static_cast<Tick>(vectors) * config_.aggregation_vector_cost;
  m.end = m.fanout_done + aggregation;
  m.latency = m.end - m.start;

  m.load = tracker_->Record(batch.size());
  if (cache_) {
    m.next_cache_budget = cache_->budget_bytes();
    if (config_.cache.adaptive && config_.cache.memory.gpu_capacity_bytes > 0) {
      const uint64_t next = NextBudget(config_.cache.memory, config_.cache.policy, m.load,
                                       cache_->budget_bytes(), tracker_->window_max());
      if (next != cache_->budget_bytes()) {
        ResizeReport r = cache_->Resize(next);
        m.evictions += r.evicted;
        m.admissions = r.admissions.size();
        SubmitAdmissions(r.admissions);
      }
      m.next_cache_budget = cache_->budget_bytes();
    }
  }
  in_flight_.erase(p.slot);
  return BatchOutcome{std::move(p.results), m};
}

void Ranker::SubmitAdmissions(const std::vector<CacheKey>& keys) {
  // One raw-fetch subrequest per server, slices per table.
  std::map<ServerId, std::map<TableId, std::vector<RowIndex>>> by_server;
  for (const CacheKey& k : keys) {
    by_server[routing_.Resolve(k.table, k.row)][k.table].push_back(k.row);
  }
  for (auto& [server, tables] : by_server) {
    Subrequest req;
    req.peer = server;
    std::vector<CacheKey> order;
    for (auto& [table, rows] : tables) {
      for (RowIndex r : rows) order.push_back(CacheKey{table, r, false});
      req.slices.push_back(SliceRequest{0, table, PoolingOp::kSum, FetchMode::kRawFetch, rows});
    }
    const uint64_t id = admission_fetches_++;
    req.tag = (kAdmissionSlot << 32) | (id & 0xffffffffu);
    admission_keys_[id & 0xffffffffu] = std::move(order);
    ++admissions_outstanding_;
    fabric_.Submit(std::move(req));
  }
}

void Ranker::PumpUntil(const std::function<bool()>& ready) {
  while (!ready()) {
    std::vector<Completion> done = fabric_.WaitCompletions();
    if (done.empty()) Fail(ErrorCode::kInternal, "transport went idle with work outstanding");
    for (auto& c : done) Absorb(std::move(c));
  }
}

BatchOutcome Ranker::ExecuteBatch(const Batch& batch) {
  auto p = Begin(batch, next_slot_++);
  PumpUntil([&] { return p->outstanding == 0; });
  BatchOutcome out = Finish(*p);
  fabric_.AdvanceTo(out.metrics.end);
  return out;
}

void Ranker::ExecuteTrace(std::span<const Batch> batches,
                          const std::function<void(const Batch&, BatchOutcome&&)>& sink) {
  std::deque<std::unique_ptr<Pending>> window;
  auto retire = [&] {
    Pending& front = *window.front();
    PumpUntil([&] { return front.outstanding == 0; });
    BatchOutcome out = Finish(front);
    if (config_.pipeline_depth == 1) fabric_.AdvanceTo(out.metrics.end);
    sink(*front.batch, std::move(out));
    window.pop_front();
  };
  for (const Batch& b : batches) {
    while (window.size() >= config_.pipeline_depth) retire();
    window.push_back(Begin(b, next_slot_++));
  }
  while (!window.empty()) retire();
  Flush();
}

void Ranker::Flush() {
  PumpUntil([&] { return admissions_outstanding_ == 0; });
}

Embedding FlatPool(const Deployment& deployment, const RoutingTable& routing,
                   const Feature& feature) {
  std::vector<Embedding> rows;
  rows.reserve(feature.indices.size());
  for (RowIndex r : feature.indices) {
    const ServerId s = routing.Resolve(feature.table, r);
    rows.push_back(std::move(deployment.server(s).LookupRows(feature.table, {&r, 1}).front()));
  }
  return PoolFlat(rows, feature.op);
}

double ElementError(float got, float want, double rel_tol, double abs_floor) {
  const double diff = std::fabs(static_cast<double>(got) - static_cast<double>(want));
  const double scale = std::max(std::fabs(static_cast<double>(want)), abs_floor / rel_tol);
  return diff / scale;
}

void AccumulateEquivalence(const Deployment& deployment, const RoutingTable& routing,
                           const Batch& batch, const BatchOutcome& outcome,
                           EquivalenceReport& report) {
  for (size_t l = 0; l < batch.size(); ++l) {
    ++report.lookups;
    for (size_t f = 0; f < batch.lookups[l].features.size(); ++f) {
      ++report.features;
      const Embedding want = FlatPool(deployment, routing, batch.lookups[l].features[f]);
      const Embedding& got = outcome.results.at(l).pooled.at(f);
      if (got.size() != want.size()) {
        report.max_rel_error = INFINITY;
        continue;
      }
      for (size_t j = 0; j < want.size(); ++j) {
        const double e = ElementError(got[j], want[j]);
        report.max_abs_error =
            std::max(report.max_abs_error, std::fabs(static_cast<double>(got[j]) - want[j]));
        if (e > report.max_rel_error) {
          report.max_rel_error = e;
          report.worst_batch = batch.id;
          report.worst_lookup = l;
          report.worst_feature = f;
        }
      }
    }
  }
}

EquivalenceReport EndToEndEquivalenceCheck(const Deployment& deployment, Ranker& ranker,
                                           std::span<const Batch> batches) {
  EquivalenceReport report;
  ranker.ExecuteTrace(batches, [&](const Batch& b, BatchOutcome&& out) {
    AccumulateEquivalence(deployment, ranker.routing(), b, out, report);
  });
  return report;
}

}  // namespace embserve
