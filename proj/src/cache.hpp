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
#include <list>
#include <map>
#include <unordered_map>
#include <vector>

#include "ids.hpp"
#include "lookup.hpp"

namespace embserve {

// Affine estimate of the GPU memory taken by NN computation for a batch:
// nn_fixed_bytes + batch * nn_per_sample_bytes. Whatever is left of the GPU
// capacity is available to the embedding cache.
struct MemoryModel {
  double gpu_capacity_bytes = 0;
  double nn_fixed_bytes = 0;
  double nn_per_sample_bytes = 0;

  void Validate() const;
  double NnBytes(uint64_t batch_size) const;
  // capacity - NnBytes(batch). Throws Error(kCapacity) when the NN alone
  // does not fit.
  uint64_t TargetCacheBytes(uint64_t batch_size) const;
  // Same as TargetCacheBytes but saturates at zero instead of throwing.
  uint64_t FitCacheBytes(uint64_t batch_size) const;
  // Largest batch whose NN memory fits next to `cache_bytes` of cache.
  uint64_t MaxBatchForCache(uint64_t cache_bytes) const;
};

enum class LoadLevel { kLow, kNormal, kHigh };
enum class WindowStatistic { kMean, kMax };

const char* LoadLevelName(LoadLevel level);

// Sliding window over recent batch sizes.
class LoadTracker {
 public:
  LoadTracker(size_t window, double low_watermark, double high_watermark,
              WindowStatistic statistic = WindowStatistic::kMean);

  LoadLevel Record(uint64_t batch_size);
  LoadLevel Classify() const;
  double statistic() const;
  uint64_t window_max() const;
  size_t window() const { return window_; }

 private:
  size_t window_;
  double low_;
  double high_;
  WindowStatistic stat_;
  std::deque<uint64_t> sizes_;
  uint64_t sum_ = 0;
};

struct CacheKey {
  TableId table;
  RowIndex row = 0;
  // Pooled-result entries live in their own keyspace; `row` then holds the
  // hash of (table, op, sorted indices).
  bool pooled = false;

  auto operator<=>(const CacheKey&) const = default;
};

struct CacheKeyHash {
  size_t operator()(const CacheKey& k) const noexcept;
};

// Decayed miss counts for admission ranking. Counts halve every
// `decay_period` recorded misses; at most `max_tracked` keys are retained.
class MissFrequencySketch {
 public:
  MissFrequencySketch(size_t max_tracked, uint64_t decay_period);

  void Record(const CacheKey& key);
  double count(const CacheKey& key) const;
  // Highest counts first, ties broken by key order.
  std::vector<CacheKey> Hottest(size_t limit,
                                const std::function<bool(const CacheKey&)>& skip) const;
  size_t tracked() const { return counts_.size(); }

 private:
  void Prune();

  size_t max_tracked_;
  uint64_t decay_period_;
  uint64_t events_ = 0;
  std::unordered_map<CacheKey, double, CacheKeyHash> counts_;
};

struct ResizeReport {
  uint64_t old_budget = 0;
  uint64_t new_budget = 0;
  size_t evicted = 0;
  std::vector<CacheKey> admissions;
};

// Ranker-side embedding cache with a byte budget and LRU eviction.
class EmbeddingCache {
 public:
  EmbeddingCache(uint64_t budget_bytes, std::map<TableId, uint64_t> row_bytes,
                 size_t sketch_keys = 1 << 14, uint64_t sketch_decay = 1 << 15);

  // Hit: refreshes recency. Miss: counted in the admission sketch.
  const Embedding* Get(TableId table, RowIndex row);
  const Embedding* Peek(const CacheKey& key) const;
  bool Contains(const CacheKey& key) const { return index_.count(key) != 0; }

  // Inserts (or refreshes) an entry, evicting LRU entries to stay within
  // budget. Returns false when the entry alone exceeds the budget.
  bool Insert(TableId table, RowIndex row, Embedding value);

  // Shrink evicts LRU entries until used <= new budget. Grow returns the
  // hottest absent rows that fit in the new room; they are fetched by the
  // caller and handed back through CompleteAdmission.
  ResizeReport Resize(uint64_t new_budget);
  // Inserts an admitted row if it still fits without eviction.
  bool CompleteAdmission(const CacheKey& key, Embedding value);
  void CancelAdmission(const CacheKey& key);

  // Pooled results of a whole feature, keyed by PooledCacheKey.
  const Embedding* GetPooled(TableId table, uint64_t key);
  bool InsertPooled(TableId table, uint64_t key, Embedding value);

  uint64_t budget_bytes() const { return budget_; }
  uint64_t used_bytes() const { return used_; }
  size_t size() const { return index_.size(); }
  uint64_t hits() const { return hits_; }
  uint64_t misses() const { return misses_; }
  uint64_t evictions() const { return evictions_; }
  const MissFrequencySketch& sketch() const { return sketch_; }

  // Least recently used first.
  std::vector<CacheKey> RecencyOrder() const;
  void set_eviction_listener(std::function<void(const CacheKey&)> fn) {
    on_evict_ = std::move(fn);
  }

 private:
  struct Entry {
    CacheKey key;
    Embedding value;
    uint64_t last_use = 0;
    uint64_t hit_count = 0;
  };
  using EntryList = std::list<Entry>;

  const Embedding* Touch(const CacheKey& key);
  bool Put(const CacheKey& key, Embedding value, bool allow_evict);
  void EvictOne();
  uint64_t RowBytes(TableId table) const;

  uint64_t budget_;
  uint64_t used_ = 0;
  uint64_t reserved_ = 0;
  uint64_t tick_ = 0;
  uint64_t hits_ = 0;
  uint64_t misses_ = 0;
  uint64_t evictions_ = 0;
  std::map<TableId, uint64_t> row_bytes_;
  EntryList lru_;  // front = least recently used
  std::unordered_map<CacheKey, EntryList::iterator, CacheKeyHash> index_;
  std::unordered_map<CacheKey, uint64_t, CacheKeyHash> pending_;
  MissFrequencySketch sketch_;
  std::function<void(const CacheKey&)> on_evict_;
};

uint64_t PooledCacheKey(TableId table, PoolingOp op, std::vector<RowIndex> indices);

struct AdaptivePolicy {
  uint64_t max_cache_bytes = 0;
  // Budget changes smaller than this fraction of GPU capacity are skipped.
  double hysteresis = 0.05;
};

// Next cache budget given the current load level. High never grows the
// budget and Low never shrinks it.
uint64_t NextBudget(const MemoryModel& model, const AdaptivePolicy& policy, LoadLevel level,
                    uint64_t current_budget, uint64_t window_max_batch);

}  // namespace embserve
