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

#include "store.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "error.hpp"
#include "hash.hpp"

namespace embserve {

float RowValue(uint64_t seed, TableId table, RowIndex row, uint32_t column) {
  uint64_t h = SplitMix64(seed);
  h = SplitMix64(h ^ table.value);
  h = SplitMix64(h ^ row);
  h = SplitMix64(h ^ column);
  // 15 high bits -> k / 2^14 - 1. Sums of up to 512 such values stay exact
  // in float.
  const auto k = static_cast<int32_t>(h >> 49);
  return static_cast<float>(k) * 0x1.0p-14f - 1.0f;
}

Shard::Shard(const ShardDesc& desc, uint32_t dim, uint64_t seed)
    : desc_(desc), dim_(dim), data_((desc.end - desc.start) * dim) {
  for (RowIndex r = desc.start; r < desc.end; ++r) {
    float* out = data_.data() + (r - desc.start) * dim;
    for (uint32_t c = 0; c < dim; ++c) out[c] = RowValue(seed, desc.table, r, c);
  }
}

std::span<const float> Shard::row(RowIndex r) const {
  return std::span<const float>(data_).subspan((r - desc_.start) * dim_, dim_);
}

const Shard& ServerStore::Locate(TableId table, RowIndex index) const {
  // Shards are sorted by (table, start).
  auto it = std::upper_bound(shards_.begin(), shards_.end(), std::make_pair(table, index),
                             [](const std::pair<TableId, RowIndex>& key, const Shard& s) {
                               if (key.first != s.desc().table) return key.first < s.desc().table;
                               return key.second < s.desc().start;
                             });
  if (it != shards_.begin()) {
    const Shard& s = *std::prev(it);
    if (s.desc().table == table && s.contains(index)) return s;
  }
  Fail(ErrorCode::kRoutingViolation,
       fmt::format("server {}: row {} of table {} is not hosted here", id_.value, index,
                   table.value));
}

std::vector<Embedding> ServerStore::LookupRows(TableId table,
                                               std::span<const RowIndex> indices) const {
  std::vector<Embedding> out;
  out.reserve(indices.size());
  for (RowIndex r : indices) {
    auto row = Locate(table, r).row(r);
    out.emplace_back(row.begin(), row.end());
  }
  return out;
}

PartialResult ServerStore::PartialPool(TableId table, std::span<const RowIndex> indices,
                                       PoolingOp /*op*/) const {
  if (indices.empty()) {
    Fail(ErrorCode::kValidation,
         fmt::format("server {}: empty partial pool", id_.value));
  }
  const Shard& first = Locate(table, indices.front());
  std::vector<double> acc(first.dim(), 0.0);
  for (RowIndex r : indices) {
    auto row = Locate(table, r).row(r);
    for (size_t j = 0; j < row.size(); ++j) acc[j] += row[j];
  }
  PartialResult out;
  out.vector.assign(acc.begin(), acc.end());
  out.count = static_cast<uint32_t>(indices.size());
  out.source = id_;
  return out;
}

Deployment Deployment::Init(std::vector<TableMeta> metas, std::vector<ShardDesc> placement,
                            uint64_t seed, uint32_t cpu_budget) {
  ValidatePlacement(metas, placement);
  if (cpu_budget < 1) Fail(ErrorCode::kConfig, "store.cpu_budget: must be >= 1");
  Deployment d;
  d.seed_ = seed;
  for (const auto& s : placement) {
    auto it = d.servers_.try_emplace(s.host, s.host, cpu_budget).first;
    it->second.shards_.emplace_back(s, FindTable(metas, s.table)->dim, seed);
  }
  for (auto& [id, server] : d.servers_) {
    std::sort(server.shards_.begin(), server.shards_.end(), [](const Shard& a, const Shard& b) {
      if (a.desc().table != b.desc().table) return a.desc().table < b.desc().table;
      return a.desc().start < b.desc().start;
    });
  }
  d.metas_ = std::move(metas);
  d.placement_ = std::move(placement);
  return d;
}

const TableMeta& Deployment::table(TableId id) const {
  const TableMeta* m = FindTable(metas_, id);
  if (m == nullptr) Fail(ErrorCode::kValidation, fmt::format("unknown table {}", id.value));
  return *m;
}

const ServerStore& Deployment::server(ServerId id) const {
  auto it = servers_.find(id);
  if (it == servers_.end()) {
    Fail(ErrorCode::kRoutingViolation, fmt::format("unknown server {}", id.value));
  }
  return it->second;
}

std::vector<ServerId> Deployment::server_ids() const {
  std::vector<ServerId> ids;
  for (const auto& [id, s] : servers_) ids.push_back(id);
  return ids;
}

}  // namespace embserve
