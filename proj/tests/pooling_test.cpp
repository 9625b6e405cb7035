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

#include <cmath>
#include <random>

#include "error.hpp"
#include "pooling.hpp"
#include "ranker.hpp"
#include "routing.hpp"
#include "support.hpp"

namespace embserve {
namespace {

using testing::Shard;
using testing::Table;

TEST(Pooling, FlatSumAndMean) {
  std::vector<Embedding> v{{1, 2}, {3, 4}};
  EXPECT_EQ(PoolFlat(v, PoolingOp::kSum), (Embedding{4, 6}));
  EXPECT_EQ(PoolFlat(v, PoolingOp::kMean), (Embedding{2, 3}));
  std::vector<Embedding> one{{0.25f, -7.5f, 3}};
  EXPECT_EQ(PoolFlat(one, PoolingOp::kSum), one[0]);
  EXPECT_EQ(PoolFlat(one, PoolingOp::kMean), one[0]);
}

TEST(Pooling, FlatErrors) {
  EXPECT_THROW(PoolFlat({}, PoolingOp::kSum), Error);
  std::vector<Embedding> bad{{1, 2}, {3}};
  EXPECT_THROW(PoolFlat(bad, PoolingOp::kSum), Error);
}

DestinationGroup Group(uint32_t server, std::vector<size_t> slice_sizes) {
  DestinationGroup g;
  g.server = ServerId(server);
  for (size_t f = 0; f < slice_sizes.size(); ++f) {
    FeatureSlice s;
    s.feature = f;
    s.indices.assign(slice_sizes[f], 0);
    s.origins.assign(slice_sizes[f], 0);
    g.slices.push_back(s);
  }
  return g;
}

TEST(Pooling, PlanByThreshold) {
  std::vector<DestinationGroup> groups{Group(0, {2}), Group(1, {1})};
  auto plan = PlanHierarchical(groups, 2);
  EXPECT_EQ(plan.modes[0][0], FetchMode::kPushdown);
  EXPECT_EQ(plan.modes[1][0], FetchMode::kRawFetch);
  EXPECT_EQ(plan.pushdown_slices(), 1u);

  std::vector<DestinationGroup> singles{Group(0, {1}), Group(1, {1}), Group(2, {1, 1})};
  EXPECT_EQ(PlanHierarchical(singles, 2).pushdown_slices(), 0u);

  std::vector<DestinationGroup> eight{Group(0, {8, 3})};
  auto p4 = PlanHierarchical(eight, 4);
  EXPECT_EQ(p4.modes[0][0], FetchMode::kPushdown);
  EXPECT_EQ(p4.modes[0][1], FetchMode::kRawFetch);
  EXPECT_EQ(p4.threshold, 4u);
  EXPECT_EQ(PlanHierarchical(eight, kNoPushdown).pushdown_slices(), 0u);
  EXPECT_THROW(PlanHierarchical(eight, 1), Error);
}

// Pushdown on a group of 8 rows: the embedding payload is one vector
// instead of eight. Bytes counted field by field from the message layout.
TEST(Pooling, EightRowGroupPayloadIsAnEighth) {
  MessageSizeModel m;
  const uint32_t dim = 64;
  const uint64_t raw = MessageSizeModel::SlicePayloadBytes(8, dim, FetchMode::kRawFetch);
  const uint64_t pushed = MessageSizeModel::SlicePayloadBytes(8, dim, FetchMode::kPushdown);
  EXPECT_EQ(raw, 8u * 64u * 4u);
  EXPECT_EQ(pushed, 64u * 4u);
  EXPECT_EQ(raw, 8 * pushed);
  EXPECT_EQ(m.SliceResponseBytes(8, dim, FetchMode::kRawFetch), 8u + 2048u);
  EXPECT_EQ(m.SliceResponseBytes(8, dim, FetchMode::kPushdown), 8u + 256u + 4u);
  std::vector<size_t> sizes{8, 3};
  EXPECT_EQ(m.RequestBytes(sizes), 64u + (8u + 64u) + (8u + 24u));
}

TEST(Pooling, PayloadMonotone) {
  for (size_t rows = 1; rows < 40; ++rows) {
    for (uint32_t dim : {1u, 7u, 64u, 256u}) {
      const auto p = MessageSizeModel::SlicePayloadBytes(rows, dim, FetchMode::kPushdown);
      const auto r = MessageSizeModel::SlicePayloadBytes(rows, dim, FetchMode::kRawFetch);
      if (rows == 1) {
        EXPECT_EQ(p, r);
      } else {
        EXPECT_LT(p, r);
      }
    }
  }
}

TEST(Pooling, CombineExamples) {
  std::vector<PartialResult> partials{{{4, 6}, 2, ServerId(0)}};
  std::vector<Embedding> raw{{5, 5}};
  EXPECT_EQ(CombinePartials(partials, raw, PoolingOp::kSum), (Embedding{9, 11}));
  auto mean = CombinePartials(partials, raw, PoolingOp::kMean);
  EXPECT_FLOAT_EQ(mean[0], 3.0f);
  EXPECT_FLOAT_EQ(mean[1], 11.0f / 3.0f);
  EXPECT_THROW(CombinePartials({}, {}, PoolingOp::kSum), Error);
  std::vector<PartialResult> zero{{{1, 1}, 0, ServerId(0)}};
  EXPECT_THROW(CombinePartials(zero, {}, PoolingOp::kSum), Error);
}

TEST(Pooling, CombineOrderIsByServer) {
  // Values chosen so float addition order matters: 1e8 + 1 - 1e8.
  std::vector<PartialResult> a{{{1.0f}, 1, ServerId(2)}, {{1e8f}, 1, ServerId(0)},
                               {{-1e8f}, 1, ServerId(1)}};
  std::vector<PartialResult> b{a[1], a[2], a[0]};
  EXPECT_EQ(CombinePartials(a, {}, PoolingOp::kSum), CombinePartials(b, {}, PoolingOp::kSum));
}

TEST(Pooling, ElementErrorFloor) {
  EXPECT_EQ(ElementError(1.0f, 1.0f), 0.0);
  EXPECT_LE(ElementError(1.0f + 1e-6f, 1.0f), 1e-5);
  EXPECT_GT(ElementError(1.0f + 1e-4f, 1.0f), 1e-5);
  // Near zero the 1e-6 absolute floor applies.
  EXPECT_LE(ElementError(9e-7f, 0.0f), 1e-5);
  EXPECT_GT(ElementError(2e-6f, 0.0f), 1e-5);
}

// Property: any split of a lookup into server groups, with any mix of
// pushdown and raw fetch, combines to the flat result. Rows are random
// floats (not the store's grid) so rounding actually occurs; the reference
// is a long double sum.
TEST(Pooling, HierarchicalEqualsFlatRandom) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  double worst = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const uint32_t dim = 1 + rng() % 256;
    const size_t n = 1 + rng() % 48;
    std::vector<Embedding> rows(n, Embedding(dim));
    for (auto& r : rows) {
      for (auto& x : r) x = val(rng);
    }
    const uint32_t servers = 1 + rng() % 6;
    std::vector<uint32_t> home(n);
    for (auto& h : home) h = rng() % servers;
    std::vector<PartialResult> partials;
    std::vector<Embedding> raw;
    for (uint32_t s = 0; s < servers; ++s) {
      std::vector<size_t> mine;
      for (size_t i = 0; i < n; ++i) {
        if (home[i] == s) mine.push_back(i);
      }
      if (mine.empty()) continue;
      if (rng() % 2 == 0) {
        std::vector<double> acc(dim, 0.0);
        for (size_t i : mine) {
          for (uint32_t j = 0; j < dim; ++j) acc[j] += rows[i][j];
        }
        partials.push_back({Embedding(acc.begin(), acc.end()), static_cast<uint32_t>(mine.size()),
                            ServerId(s)});
      } else {
        for (size_t i : mine) raw.push_back(rows[i]);
      }
    }
    for (PoolingOp op : {PoolingOp::kSum, PoolingOp::kMean}) {
      auto got = CombinePartials(partials, raw, op);
      auto flat = PoolFlat(rows, op);
      ASSERT_EQ(got.size(), dim);
      for (uint32_t j = 0; j < dim; ++j) {
        long double ref = 0;
        for (const auto& r : rows) ref += r[j];
        if (op == PoolingOp::kMean) ref /= static_cast<long double>(n);
        const float want = static_cast<float>(ref);
        worst = std::max(worst, ElementError(got[j], want));
        worst = std::max(worst, ElementError(flat[j], want));
      }
    }
  }
  EXPECT_LE(worst, 1e-5);
}

// Same property through the store: partials come from PartialPool on the
// hosting server.
TEST(Pooling, HierarchicalEqualsFlatThroughStore) {
  std::mt19937_64 rng(31);
  std::vector<TableMeta> metas{Table(0, 400, 24), Table(1, 90, 5)};
  auto shards = testing::RandomPlacement(rng, metas, 3, 6);
  auto dep = Deployment::Init(metas, shards, 3, 1);
  auto rt = RoutingTable::Build(metas, shards);
  for (int trial = 0; trial < 300; ++trial) {
    Feature f{TableId(static_cast<uint32_t>(rng() % 2)),
              rng() % 2 ? PoolingOp::kSum : PoolingOp::kMean, {}};
    f.indices.resize(1 + rng() % 30);
    for (auto& i : f.indices) i = rng() % metas[f.table.value].num_rows;
    LookupRequest lookup{{f}};
    auto groups = GroupByServer(rt, lookup);
    const uint32_t threshold = 2 + rng() % 4;
    auto plan = PlanHierarchical(groups, threshold);
    std::vector<PartialResult> partials;
    std::vector<Embedding> raw;
    for (size_t g = 0; g < groups.size(); ++g) {
      const auto& srv = dep.server(groups[g].server);
      const auto& slice = groups[g].slices[0];
      if (plan.modes[g][0] == FetchMode::kPushdown) {
        partials.push_back(srv.PartialPool(slice.table, slice.indices, f.op));
      } else {
        for (auto& r : srv.LookupRows(slice.table, slice.indices)) raw.push_back(std::move(r));
      }
    }
    auto got = CombinePartials(partials, raw, f.op);
    auto want = FlatPool(dep, rt, f);
    for (size_t j = 0; j < got.size(); ++j) EXPECT_LE(ElementError(got[j], want[j]), 1e-5);
  }
}

}  // namespace
}  // namespace embserve
