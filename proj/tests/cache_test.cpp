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


#include <gtest/gtest.h>

#include <random>

#include "cache.hpp"
#include "error.hpp"
#include "lru_oracle.hpp"
#include "workload.hpp"

namespace embserve {
namespace {

using testing::ReferenceLru;

TEST(LoadTrackerTest, Examples) {
  LoadTracker high(4, 128, 512);
  for (int i = 0; i < 4; ++i) high.Record(600);
  EXPECT_EQ(high.Classify(), LoadLevel::kHigh);

  LoadTracker low(4, 128, 512);
  for (int i = 0; i < 4; ++i) low.Record(64);
  EXPECT_EQ(low.Classify(), LoadLevel::kLow);

  LoadTracker mixed(4, 128, 512);
  for (uint64_t b : {600, 64, 600, 64}) mixed.Record(b);
  EXPECT_DOUBLE_EQ(mixed.statistic(), 332.0);
  EXPECT_EQ(mixed.Classify(), LoadLevel::kNormal);
}

TEST(LoadTrackerTest, WindowSlides) {
  LoadTracker t(2, 10, 20);
  t.Record(100);
  t.Record(100);
  EXPECT_EQ(t.Classify(), LoadLevel::kHigh);
  t.Record(1);
  EXPECT_EQ(t.Record(1), LoadLevel::kLow);
  EXPECT_EQ(t.window_max(), 1u);

  LoadTracker m(3, 10, 20, WindowStatistic::kMax);
  m.Record(1);
  m.Record(25);
  EXPECT_EQ(m.Record(1), LoadLevel::kHigh);
  EXPECT_THROW(LoadTracker(2, 20, 10), Error);
}

// Property: the level is a pure function of the last W sizes.
TEST(LoadTrackerTest, ClassificationDependsOnlyOnWindow) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    LoadTracker a(5, 100, 300), b(5, 100, 300);
    for (int i = 0; i < 20; ++i) a.Record(1 + rng() % 1000);
    std::vector<uint64_t> tail(5);
    for (auto& x : tail) x = 1 + rng() % 500;
    for (uint64_t x : tail) {
      a.Record(x);
      b.Record(x);
    }
    EXPECT_EQ(a.Classify(), b.Classify());
  }
}

MemoryModel Small() { return MemoryModel{100, 20, 0.1}; }

TEST(MemoryModelTest, TargetCacheBytes) {
  EXPECT_EQ(Small().TargetCacheBytes(400), 40u);
  EXPECT_EQ(Small().TargetCacheBytes(800), 0u);
  try {
    Small().TargetCacheBytes(900);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapacity);
  }
  EXPECT_EQ(Small().FitCacheBytes(900), 0u);
}

TEST(MemoryModelTest, MaxBatchForCache) {
  EXPECT_EQ(Small().MaxBatchForCache(40), 400u);
  EXPECT_EQ(Small().MaxBatchForCache(0), 800u);
  uint64_t prev = Small().MaxBatchForCache(0);
  for (uint64_t c = 1; c <= 80; ++c) {
    const uint64_t b = Small().MaxBatchForCache(c);
    EXPECT_LE(b, prev) << c;
    // Independent recomputation in exact integer arithmetic (units of 0.1).
    EXPECT_EQ(b, (1000 - 10 * c - 200)) << c;
    prev = b;
  }
  EXPECT_THROW(Small().MaxBatchForCache(81), Error);
  EXPECT_THROW((MemoryModel{100, 120, 1}).Validate(), Error);
}

TEST(MemoryModelTest, RoundTripsWithTarget) {
  MemoryModel m{8 << 20, 1 << 20, 8192};
  for (uint64_t b = 1; b < 896; b += 17) {
    EXPECT_GE(m.MaxBatchForCache(m.TargetCacheBytes(b)), b);
  }
}

std::map<TableId, uint64_t> OneTable(uint32_t dim) { return {{TableId(0), dim * 4ull}}; }
Embedding Vec(float x) { return Embedding{x, x}; }

TEST(CacheTest, GetAfterInsertAndMiss) {
  EmbeddingCache c(64, OneTable(2));
  EXPECT_EQ(c.Get(TableId(0), 1), nullptr);
  EXPECT_EQ(c.misses(), 1u);
  ASSERT_TRUE(c.Insert(TableId(0), 1, Embedding{0.5f, -0.25f}));
  const Embedding* v = c.Get(TableId(0), 1);
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(*v, (Embedding{0.5f, -0.25f}));
  EXPECT_EQ(c.hits(), 1u);
  EXPECT_EQ(c.used_bytes(), 8u);
}

TEST(CacheTest, ShrinkEvictsLeastRecent) {
  EmbeddingCache c(24, OneTable(2));
  for (RowIndex r : {0, 1, 2}) c.Insert(TableId(0), r, Vec(static_cast<float>(r)));
  std::vector<CacheKey> evicted;
  c.set_eviction_listener([&](const CacheKey& k) { evicted.push_back(k); });
  auto rep = c.Resize(16);
  EXPECT_EQ(rep.evicted, 1u);
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(evicted[0].row, 0u);
  EXPECT_LE(c.used_bytes(), c.budget_bytes());
}

TEST(CacheTest, GrowAdmitsHottestMiss) {
  EmbeddingCache c(0, OneTable(2));
  for (int i = 0; i < 9; ++i) c.Get(TableId(0), 100);
  for (int i = 0; i < 3; ++i) c.Get(TableId(0), 200);
  auto rep = c.Resize(8);
  ASSERT_EQ(rep.admissions.size(), 1u);
  EXPECT_EQ(rep.admissions[0].row, 100u);
  EXPECT_EQ(c.Get(TableId(0), 100), nullptr);  // fetched later, not yet present
  EXPECT_TRUE(c.CompleteAdmission(rep.admissions[0], Vec(1)));
  EXPECT_NE(c.Get(TableId(0), 100), nullptr);
}

TEST(CacheTest, AdmissionNeverEvicts) {
  EmbeddingCache c(16, OneTable(2));
  c.Get(TableId(0), 7);
  auto rep = c.Resize(24);
  ASSERT_EQ(rep.admissions.size(), 1u);
  c.Insert(TableId(0), 1, Vec(1));
  c.Insert(TableId(0), 2, Vec(2));
  c.Insert(TableId(0), 3, Vec(3));
  EXPECT_FALSE(c.CompleteAdmission(rep.admissions[0], Vec(7)));
  EXPECT_EQ(c.size(), 3u);
}

TEST(CacheTest, OversizedEntryRejected) {
  EmbeddingCache c(4, OneTable(2));
  EXPECT_FALSE(c.Insert(TableId(0), 0, Vec(0)));
  EXPECT_EQ(c.used_bytes(), 0u);
}

TEST(CacheTest, PooledKeyspaceIsSeparate) {
  EmbeddingCache c(64, OneTable(2));
  const uint64_t k = PooledCacheKey(TableId(0), PoolingOp::kSum, {3, 1, 2});
  EXPECT_EQ(k, PooledCacheKey(TableId(0), PoolingOp::kSum, {1, 2, 3}));
  EXPECT_NE(k, PooledCacheKey(TableId(0), PoolingOp::kMean, {1, 2, 3}));
  c.InsertPooled(TableId(0), k, Vec(9));
  EXPECT_EQ(c.Get(TableId(0), k), nullptr);
  ASSERT_NE(c.GetPooled(TableId(0), k), nullptr);
}

// Property: eviction order matches a reference LRU on random access
// strings; budget holds after every step; hits + misses == requests.
TEST(CacheTest, MatchesReferenceLru) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t cap = 1 + rng() % 20;
    const uint64_t keys = 1 + rng() % 60;
    EmbeddingCache c(cap * 8, OneTable(2));
    ReferenceLru ref(cap);
    std::vector<uint64_t> evicted;
    c.set_eviction_listener([&](const CacheKey& k) { evicted.push_back(k.row); });
    uint64_t hits = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      const RowIndex r = rng() % keys;
      const bool hit = c.Get(TableId(0), r) != nullptr;
      if (!hit) c.Insert(TableId(0), r, Vec(static_cast<float>(r)));
      EXPECT_EQ(hit, ref.Access(r));
      hits += hit;
      ASSERT_LE(c.used_bytes(), c.budget_bytes());
      ASSERT_EQ(c.used_bytes(), c.size() * 8);
    }
    EXPECT_EQ(evicted, ref.evictions());
    std::vector<uint64_t> order;
    for (const auto& k : c.RecencyOrder()) order.push_back(k.row);
    EXPECT_EQ(order, ref.order());
    EXPECT_EQ(c.hits(), hits);
    EXPECT_EQ(c.hits() + c.misses(), static_cast<uint64_t>(n));
  }
}

TEST(CacheTest, BudgetSafetyUnderResize) {
  std::mt19937_64 rng(12);
  EmbeddingCache c(400, std::map<TableId, uint64_t>{{TableId(0), 8}, {TableId(1), 16}});
  for (int i = 0; i < 5000; ++i) {
    const uint32_t t = rng() % 2;
    const RowIndex r = rng() % 200;
    if (!c.Get(TableId(t), r)) c.Insert(TableId(t), r, Embedding(t == 0 ? 2 : 4, 1.0f));
    if (i % 97 == 0) {
      auto rep = c.Resize(rng() % 800);
      for (const auto& k : rep.admissions) {
        c.CompleteAdmission(k, Embedding(k.table.value == 0 ? 2 : 4, 2.0f));
      }
    }
    ASSERT_LE(c.used_bytes(), c.budget_bytes());
  }
}

TEST(CacheTest, ZipfHitRateNearCharacteristicTime) {
  const uint64_t rows = 10000;
  ZipfSampler zipf(rows, 1.0);
  std::mt19937_64 rng(77);
  const size_t cap = rows / 10;
  EmbeddingCache c(cap * 8, OneTable(2));
  ReferenceLru ref(cap);
  const int warm = 50000, measure = 200000;
  uint64_t hits = 0, ref_hits = 0;
  std::vector<double> hist(rows, 0);
  for (int i = 0; i < warm + measure; ++i) {
    const RowIndex r = zipf.Sample(std::uniform_real_distribution<double>(0, 1)(rng));
    const bool hit = c.Get(TableId(0), r) != nullptr;
    if (!hit) c.Insert(TableId(0), r, Vec(0));
    const bool rh = ref.Access(r);
    if (i >= warm) {
      hits += hit;
      ref_hits += rh;
      hist[r] += 1;
    }
  }
  for (auto& h : hist) h /= measure;
  const double got = static_cast<double>(hits) / measure;
  EXPECT_EQ(hits, ref_hits);
  const double oracle = testing::CharacteristicTimeHitRate(hist, static_cast<double>(cap));
  EXPECT_NEAR(got, oracle, 0.03) << "got " << got << " oracle " << oracle;
}

TEST(NextBudgetTest, DirectionFollowsLoad) {
  MemoryModel m{1000, 100, 1};
  AdaptivePolicy p{600, 0.05};
  EXPECT_EQ(NextBudget(m, p, LoadLevel::kHigh, 500, 800), 100u);
  EXPECT_EQ(NextBudget(m, p, LoadLevel::kLow, 100, 50), 600u);
  EXPECT_EQ(NextBudget(m, p, LoadLevel::kNormal, 300, 10), 300u);
  // Changes under 5% of capacity are skipped.
  EXPECT_EQ(NextBudget(m, p, LoadLevel::kHigh, 520, 400), 520u);
}

TEST(NextBudgetTest, DirectionProperty) {
  std::mt19937_64 rng(4);
  MemoryModel m{1 << 20, 1 << 16, 512};
  AdaptivePolicy p{1 << 19, 0.02};
  for (int i = 0; i < 5000; ++i) {
    const uint64_t cur = rng() % (1 << 20);
    const uint64_t batch = rng() % 2000;
    EXPECT_LE(NextBudget(m, p, LoadLevel::kHigh, cur, batch), cur);
    EXPECT_GE(NextBudget(m, p, LoadLevel::kLow, cur, batch), cur);
  }
}

}  // namespace
}  // namespace embserve
