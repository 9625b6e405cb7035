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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <random>

#include "error.hpp"
#include "routing.hpp"
#include "support.hpp"

namespace embserve {
namespace {

using testing::RandomPlacement;
using testing::ScanPlacement;
using testing::Shard;
using testing::Table;

RoutingTable TwoRanges() {
  std::vector<TableMeta> metas{Table(0, 200, 4)};
  std::vector<ShardDesc> shards{Shard(0, 0, 100, 0), Shard(0, 100, 200, 1)};
  return RoutingTable::Build(metas, shards);
}

TEST(Routing, TwoRangesResolve) {
  auto rt = TwoRanges();
  ASSERT_EQ(rt.entries(TableId(0)).size(), 2u);
  EXPECT_EQ(rt.Resolve(TableId(0), 150), ServerId(1));
  EXPECT_EQ(rt.Resolve(TableId(0), 99), ServerId(0));
  EXPECT_EQ(rt.Resolve(TableId(0), 100), ServerId(1));
  EXPECT_EQ(rt.Resolve(TableId(0), 0), ServerId(0));
  try {
    rt.Resolve(TableId(0), 200);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  EXPECT_THROW(rt.Resolve(TableId(5), 0), Error);
}

TEST(Routing, SingleShardIdentity) {
  std::vector<TableMeta> metas{Table(2, 1000, 4)};
  std::vector<ShardDesc> shards{Shard(2, 0, 1000, 3)};
  auto rt = RoutingTable::Build(metas, shards);
  ASSERT_EQ(rt.entries(TableId(2)).size(), 1u);
  for (RowIndex i = 0; i < 1000; i += 37) EXPECT_EQ(rt.Resolve(TableId(2), i), ServerId(3));
}

TEST(Routing, InvalidPlacementFailsLikeTheStore) {
  std::vector<TableMeta> metas{Table(0, 4, 2)};
  std::vector<ShardDesc> overlap{Shard(0, 0, 2, 0), Shard(0, 1, 4, 0)};
  try {
    RoutingTable::Build(metas, overlap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("overlap at row 1"), std::string::npos);
  }
}

TEST(Routing, EntriesMirrorPlacementSorted) {
  std::vector<TableMeta> metas{Table(0, 30, 2)};
  std::vector<ShardDesc> shards{Shard(0, 20, 30, 2), Shard(0, 0, 10, 0), Shard(0, 10, 20, 1)};
  auto rt = RoutingTable::Build(metas, shards);
  auto e = rt.entries(TableId(0));
  ASSERT_EQ(e.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(e[i].start, 10 * i);
    EXPECT_EQ(e[i].end, 10 * (i + 1));
    EXPECT_EQ(e[i].server, ServerId(static_cast<uint32_t>(i)));
  }
}

TEST(Routing, RandomFiveShardPlacementMatchesScan) {
  std::mt19937_64 rng(5);
  std::vector<TableMeta> metas{Table(0, 10000, 8)};
  std::vector<ShardDesc> shards;
  while (true) {
    shards = RandomPlacement(rng, metas, 4, 5);
    if (shards.size() == 5) break;
  }
  auto rt = RoutingTable::Build(metas, shards);
  for (int i = 0; i < 1000; ++i) {
    const RowIndex idx = rng() % 10000;
    EXPECT_EQ(rt.Resolve(TableId(0), idx), ScanPlacement(shards, TableId(0), idx));
  }
}

TEST(Routing, ResolveIsLogarithmic) {
  std::vector<TableMeta> metas{Table(0, 1 << 16, 1)};
  std::vector<ShardDesc> shards;
  for (uint64_t s = 0; s < 1024; ++s) shards.push_back(Shard(0, s * 64, (s + 1) * 64, s % 7));
  auto rt = RoutingTable::Build(metas, shards);
  uint64_t worst = 0;
  for (RowIndex i = 0; i < (1 << 16); i += 13) {
    uint64_t cmp = 0;
    rt.Resolve(TableId(0), i, &cmp);
    worst = std::max(worst, cmp);
  }
  // ceil(log2(1024)) + 1 probes at most.
  EXPECT_LE(worst, 11u);
  EXPECT_GE(worst, 1u);
}

std::multiset<std::pair<uint32_t, RowIndex>> Flatten(const std::vector<DestinationGroup>& groups) {
  std::multiset<std::pair<uint32_t, RowIndex>> out;
  for (const auto& g : groups) {
    for (const auto& s : g.slices) {
      for (RowIndex i : s.indices) out.insert({s.table.value, i});
    }
  }
  return out;
}

TEST(Routing, GroupByServerExample) {
  auto rt = TwoRanges();
  LookupRequest lookup{{Feature{TableId(0), PoolingOp::kSum, {1, 150, 2}}}};
  auto groups = GroupByServer(rt, lookup);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].server, ServerId(0));
  EXPECT_EQ(groups[0].slices.at(0).indices, (std::vector<RowIndex>{1, 2}));
  EXPECT_EQ(groups[0].slices.at(0).origins, (std::vector<uint32_t>{0, 2}));
  EXPECT_EQ(groups[1].server, ServerId(1));
  EXPECT_EQ(groups[1].slices.at(0).indices, (std::vector<RowIndex>{150}));
  EXPECT_EQ(groups[1].slices.at(0).origins, (std::vector<uint32_t>{1}));
}

TEST(Routing, AllOnOneServerGivesOneGroup) {
  auto rt = TwoRanges();
  LookupRequest lookup{{Feature{TableId(0), PoolingOp::kSum, {3, 4, 5, 99}}}};
  auto groups = GroupByServer(rt, lookup);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].total_indices(), 4u);
}

TEST(Routing, ThreeTablesOnThreeServers) {
  std::vector<TableMeta> metas{Table(0, 10, 2), Table(1, 10, 2), Table(2, 10, 2)};
  std::vector<ShardDesc> shards{Shard(0, 0, 10, 0), Shard(1, 0, 10, 1), Shard(2, 0, 10, 2)};
  auto rt = RoutingTable::Build(metas, shards);
  LookupRequest lookup{{Feature{TableId(0), PoolingOp::kSum, {1, 1, 9}},
                        Feature{TableId(1), PoolingOp::kMean, {0}},
                        Feature{TableId(2), PoolingOp::kSum, {5, 4}}}};
  auto groups = GroupByServer(rt, lookup);
  ASSERT_EQ(groups.size(), 3u);
  std::multiset<std::pair<uint32_t, RowIndex>> want;
  for (const auto& f : lookup.features) {
    for (RowIndex i : f.indices) want.insert({f.table.value, i});
  }
  EXPECT_EQ(Flatten(groups), want);
}

TEST(Routing, OutOfRangeNamesTheFeature) {
  auto rt = TwoRanges();
  LookupRequest lookup{{Feature{TableId(0), PoolingOp::kSum, {1, 250}}}};
  try {
    GroupByServer(rt, lookup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    const std::string w = e.what();
    EXPECT_NE(w.find("feature 0"), std::string::npos) << w;
    EXPECT_NE(w.find("250"), std::string::npos) << w;
  }
}

// Property: grouping partitions the lookup and every index lands on the
// server a shard scan names; origins point back at the input position.
TEST(Routing, GroupingIsAPartition) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TableMeta> metas;
    const uint32_t ntables = 1 + rng() % 4;
    for (uint32_t t = 0; t < ntables; ++t) metas.push_back(Table(t, 1 + rng() % 500, 2));
    auto shards = RandomPlacement(rng, metas, 1 + rng() % 6, 8);
    auto rt = RoutingTable::Build(metas, shards);
    LookupRequest lookup;
    const uint32_t nf = 1 + rng() % 5;
    for (uint32_t f = 0; f < nf; ++f) {
      Feature feat{TableId(static_cast<uint32_t>(rng() % ntables)), PoolingOp::kSum, {}};
      const uint64_t rows = metas[feat.table.value].num_rows;
      feat.indices.resize(1 + rng() % 20);
      for (auto& i : feat.indices) i = rng() % rows;
      lookup.features.push_back(feat);
    }
    auto groups = GroupByServer(rt, lookup);
    std::multiset<std::pair<uint32_t, RowIndex>> want;
    for (const auto& f : lookup.features) {
      for (RowIndex i : f.indices) want.insert({f.table.value, i});
    }
    EXPECT_EQ(Flatten(groups), want);
    for (const auto& g : groups) {
      for (const auto& s : g.slices) {
        const auto& feat = lookup.features[s.feature];
        ASSERT_EQ(s.indices.size(), s.origins.size());
        for (size_t k = 0; k < s.indices.size(); ++k) {
          EXPECT_EQ(feat.indices[s.origins[k]], s.indices[k]);
          EXPECT_EQ(ScanPlacement(shards, s.table, s.indices[k]), g.server);
          if (k > 0) {
            EXPECT_LT(s.origins[k - 1], s.origins[k]);
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace embserve
