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

#include "cache.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "error.hpp"
#include "hash.hpp"

namespace embserve {

namespace {

constexpr double kByteSlack = 1e-9;

}  // namespace

void MemoryModel::Validate() const {
  if (gpu_capacity_bytes < 0 || nn_fixed_bytes < 0 || nn_per_sample_bytes < 0) {
    Fail(ErrorCode::kConfig, "cache: memory model coefficients must be >= 0");
  }
  if (nn_fixed_bytes > gpu_capacity_bytes) {
    Fail(ErrorCode::kConfig, "cache.nn_fixed_bytes: exceeds gpu_capacity_bytes");
  }
}

double MemoryModel::NnBytes(uint64_t batch_size) const {
  return nn_fixed_bytes + static_cast<double>(batch_size) * nn_per_sample_bytes;
}

uint64_t MemoryModel::TargetCacheBytes(uint64_t batch_size) const {
  const double free = gpu_capacity_bytes - NnBytes(batch_size);
  if (free < -kByteSlack * std::max(1.0, gpu_capacity_bytes)) {
    Fail(ErrorCode::kCapacity,
         fmt::format("batch of {} needs {:.0f} bytes of NN memory, capacity is {:.0f}",
                     batch_size, NnBytes(batch_size), gpu_capacity_bytes));
  }
  return free <= 0 ? 0 : static_cast<uint64_t>(std::floor(free + kByteSlack));
}

uint64_t MemoryModel::FitCacheBytes(uint64_t batch_size) const {
  const double free = gpu_capacity_bytes - NnBytes(batch_size);
  return free <= 0 ? 0 : static_cast<uint64_t>(std::floor(free + kByteSlack));
}

uint64_t MemoryModel::MaxBatchForCache(uint64_t cache_bytes) const {
  const double avail = gpu_capacity_bytes - static_cast<double>(cache_bytes) - nn_fixed_bytes;
  const double slack = kByteSlack * std::max(1.0, gpu_capacity_bytes);
  if (avail < -slack) {
    Fail(ErrorCode::kCapacity,
         fmt::format("cache of {} bytes plus NN fixed memory exceeds capacity", cache_bytes));
  }
  if (nn_per_sample_bytes <= 0) {
    Fail(ErrorCode::kConfig, "cache.nn_per_sample_bytes: must be > 0 to bound batch size");
  }
  if (avail <= 0) return 0;
  auto b = static_cast<uint64_t>(std::floor(avail / nn_per_sample_bytes + 1e-9));
  while (b > 0 && static_cast<double>(b) * nn_per_sample_bytes > avail + slack) --b;
  return b;
}

const char* LoadLevelName(LoadLevel level) {
  switch (level) {
    case LoadLevel::kLow: return "low";
    case LoadLevel::kNormal: return "normal";
    case LoadLevel::kHigh: return "high";
  }
  return "?";
}

LoadTracker::LoadTracker(size_t window, double low_watermark, double high_watermark,
                         WindowStatistic statistic)
    : window_(window), low_(low_watermark), high_(high_watermark), stat_(statistic) {
  if (window_ < 1) Fail(ErrorCode::kConfig, "cache.window: must be >= 1");
  if (!(low_ < high_)) {
    Fail(ErrorCode::kConfig, "cache.low_watermark: must be below high_watermark");
  }
}

LoadLevel LoadTracker::Record(uint64_t batch_size) {
  sizes_.push_back(batch_size);
  sum_ += batch_size;
  if (sizes_.size() > window_) {
    sum_ -= sizes_.front();
    sizes_.pop_front();
  }
  return Classify();
}

double LoadTracker::statistic() const {
  if (sizes_.empty()) return 0;
  if (stat_ == WindowStatistic::kMax) return static_cast<double>(window_max());
  return static_cast<double>(sum_) / static_cast<double>(sizes_.size());
}

uint64_t LoadTracker::window_max() const {
  return sizes_.empty() ? 0 : *std::max_element(sizes_.begin(), sizes_.end());
}

LoadLevel LoadTracker::Classify() const {
  const double s = statistic();
  if (s >= high_) return LoadLevel::kHigh;
  if (s <= low_) return LoadLevel::kLow;
  return LoadLevel::kNormal;
}

size_t CacheKeyHash::operator()(const CacheKey& k) const noexcept {
  return static_cast<size_t>(
      SplitMix64(SplitMix64(k.row) ^ (uint64_t{k.table.value} << 1) ^ (k.pooled ? 1 : 0)));
}

MissFrequencySketch::MissFrequencySketch(size_t max_tracked, uint64_t decay_period)
    : max_tracked_(std::max<size_t>(1, max_tracked)),
      decay_period_(std::max<uint64_t>(1, decay_period)) {}

void MissFrequencySketch::Record(const CacheKey& key) {
  counts_[key] += 1.0;
  if (++events_ % decay_period_ == 0) {
    for (auto it = counts_.begin(); it != counts_.end();) {
      it->second *= 0.5;
      it = it->second < 0.5 ? counts_.erase(it) : std::next(it);
    }
  }
  if (counts_.size() > 2 * max_tracked_) Prune();
}

void MissFrequencySketch::Prune() {
  std::vector<std::pair<double, CacheKey>> all;
  all.reserve(counts_.size());
  for (const auto& [k, c] : counts_) all.emplace_back(c, k);
  std::nth_element(all.begin(), all.begin() + static_cast<long>(max_tracked_), all.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });
  for (size_t i = max_tracked_; i < all.size(); ++i) counts_.erase(all[i].second);
}

double MissFrequencySketch::count(const CacheKey& key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0.0 : it->second;
}

std::vector<CacheKey> MissFrequencySketch::Hottest(
    size_t limit, const std::function<bool(const CacheKey&)>& skip) const {
  std::vector<std::pair<double, CacheKey>> cand;
  for (const auto& [k, c] : counts_) {
    if (!skip || !skip(k)) cand.emplace_back(c, k);
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  const size_t n = std::min(limit, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(n), cand.end(), better);
  std::vector<CacheKey> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(cand[i].second);
  return out;
}

EmbeddingCache::EmbeddingCache(uint64_t budget_bytes, std::map<TableId, uint64_t> row_bytes,
                               size_t sketch_keys, uint64_t sketch_decay)
    : budget_(budget_bytes),
      row_bytes_(std::move(row_bytes)),
      sketch_(sketch_keys, sketch_decay) {}

uint64_t EmbeddingCache::RowBytes(TableId table) const {
  auto it = row_bytes_.find(table);
  if (it == row_bytes_.end()) {
    Fail(ErrorCode::kValidation, fmt::format("cache: unknown table {}", table.value));
  }
  return it->second;
}

const Embedding* EmbeddingCache::Touch(const CacheKey& key) {
  auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  lru_.splice(lru_.end(), lru_, it->second);
  it->second->last_use = ++tick_;
  ++it->second->hit_count;
  return &it->second->value;
}

const Embedding* EmbeddingCache::Get(TableId table, RowIndex row) {
  const CacheKey key{table, row, false};
  if (const Embedding* v = Touch(key)) {
    ++hits_;
    return v;
  }
  ++misses_;
  sketch_.Record(key);
  return nullptr;
}

const Embedding* EmbeddingCache::Peek(const CacheKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &it->second->value;
}

void EmbeddingCache::EvictOne() {
  Entry& victim = lru_.front();
  used_ -= victim.value.size() * kElementWidth;
  ++evictions_;
  if (on_evict_) on_evict_(victim.key);
  index_.erase(victim.key);
  lru_.pop_front();
}

bool EmbeddingCache::Put(const CacheKey& key, Embedding value, bool allow_evict) {
  const uint64_t bytes = value.size() * kElementWidth;
  if (auto it = index_.find(key); it != index_.end()) {
    lru_.splice(lru_.end(), lru_, it->second);
    it->second->last_use = ++tick_;
    return true;
  }
  if (bytes > budget_) return false;
  if (!allow_evict && used_ + bytes > budget_) return false;
  while (used_ + bytes > budget_) EvictOne();
  lru_.push_back(Entry{key, std::move(value), ++tick_, 0});
  index_[key] = std::prev(lru_.end());
  used_ += bytes;
  return true;
}

bool EmbeddingCache::Insert(TableId table, RowIndex row, Embedding value) {
  return Put(CacheKey{table, row, false}, std::move(value), true);
}

ResizeReport EmbeddingCache::Resize(uint64_t new_budget) {
  ResizeReport report;
  report.old_budget = budget_;
  report.new_budget = new_budget;
  const uint64_t before = evictions_;
  budget_ = new_budget;
  while (used_ > budget_) EvictOne();
  report.evicted = static_cast<size_t>(evictions_ - before);

  if (new_budget > report.old_budget) {
    uint64_t room = budget_ - std::min(budget_, used_ + reserved_);
    auto skip = [&](const CacheKey& k) { return k.pooled || Contains(k) || pending_.count(k); };
    // Rows are small relative to any useful budget; over-fetching candidates
    // lets us skip ones that do not fit.
    for (const CacheKey& k : sketch_.Hottest(room / 4 + 16, skip)) {
      const uint64_t bytes = RowBytes(k.table);
      if (bytes > room) continue;
      room -= bytes;
      reserved_ += bytes;
      pending_[k] = bytes;
      report.admissions.push_back(k);
      if (room == 0) break;
    }
  }
  return report;
}

void EmbeddingCache::CancelAdmission(const CacheKey& key) {
  auto it = pending_.find(key);
  if (it == pending_.end()) return;
  reserved_ -= it->second;
  pending_.erase(it);
}

bool EmbeddingCache::CompleteAdmission(const CacheKey& key, Embedding value) {
  CancelAdmission(key);
  return Put(key, std::move(value), false);
}

const Embedding* EmbeddingCache::GetPooled(TableId table, uint64_t key) {
  return Touch(CacheKey{table, key, true});
}

bool EmbeddingCache::InsertPooled(TableId table, uint64_t key, Embedding value) {
  return Put(CacheKey{table, key, true}, std::move(value), true);
}

std::vector<CacheKey> EmbeddingCache::RecencyOrder() const {
  std::vector<CacheKey> out;
  out.reserve(lru_.size());
  for (const auto& e : lru_) out.push_back(e.key);
  return out;
}

uint64_t PooledCacheKey(TableId table, PoolingOp op, std::vector<RowIndex> indices) {
  std::sort(indices.begin(), indices.end());
  Fnv1a64 h;
  h.Update(uint64_t{table.value});
  h.Update(uint64_t{op == PoolingOp::kMean ? 1u : 0u});
  for (RowIndex r : indices) h.Update(r);
  return h.digest();
}

uint64_t NextBudget(const MemoryModel& model, const AdaptivePolicy& policy, LoadLevel level,
                    uint64_t current_budget, uint64_t window_max_batch) {
  const uint64_t fit = std::min(policy.max_cache_bytes, model.FitCacheBytes(window_max_batch));
  uint64_t candidate = current_budget;
  if (level == LoadLevel::kHigh) candidate = std::min(current_budget, fit);
  if (level == LoadLevel::kLow) candidate = std::max(current_budget, fit);
  const double delta = std::fabs(static_cast<double>(candidate) -
                                 static_cast<double>(current_budget));
  if (delta < policy.hysteresis * model.gpu_capacity_bytes) return current_budget;
  return candidate;
}

}  // namespace embserve
