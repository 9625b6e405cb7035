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
#include <map>
#include <span>
#include <vector>

#include "ids.hpp"
#include "lookup.hpp"
#include "placement.hpp"
#include "pooling.hpp"

namespace embserve {

// Row content is a pure function of (seed, table, row, column): uniform in
// [-1, 1) on a 2^-14 grid, so small sums of rows are exact floats.
float RowValue(uint64_t seed, TableId table, RowIndex row, uint32_t column);

class Shard {
 public:
  Shard(const ShardDesc& desc, uint32_t dim, uint64_t seed);

  const ShardDesc& desc() const { return desc_; }
  uint32_t dim() const { return dim_; }
  bool contains(RowIndex r) const { return r >= desc_.start && r < desc_.end; }
  std::span<const float> row(RowIndex r) const;
  std::span<const float> data() const { return data_; }

 private:
  ShardDesc desc_;
  uint32_t dim_;
  std::vector<float> data_;
};

// The shards hosted by one embedding server. Read-only after construction.
class ServerStore {
 public:
  ServerStore(ServerId id, uint32_t cpu_budget) : id_(id), cpu_budget_(cpu_budget) {}

  ServerId id() const { return id_; }
  uint32_t cpu_budget() const { return cpu_budget_; }
  const std::vector<Shard>& shards() const { return shards_; }

  // Output order follows `indices`; duplicates are returned per occurrence.
  // Throws Error(kRoutingViolation) if an index is not hosted here.
  std::vector<Embedding> LookupRows(TableId table, std::span<const RowIndex> indices) const;

  // Element-wise sum of the selected rows (64-bit accumulation in input
  // order, rounded on emit) plus the row count. Division for Mean is left to
  // the ranker, so `op` does not change the payload.
  PartialResult PartialPool(TableId table, std::span<const RowIndex> indices,
                            PoolingOp op = PoolingOp::kSum) const;

 private:
  friend class Deployment;
  const Shard& Locate(TableId table, RowIndex index) const;

  ServerId id_;
  uint32_t cpu_budget_;
  std::vector<Shard> shards_;
};

// All embedding servers of one deployment.
class Deployment {
 public:
  // Validates the placement (see ValidatePlacement) and materializes every
  // shard. Same inputs produce bit-identical shard contents.
  static Deployment Init(std::vector<TableMeta> metas, std::vector<ShardDesc> placement,
                         uint64_t seed, uint32_t cpu_budget);

  uint64_t seed() const { return seed_; }
  const std::vector<TableMeta>& tables() const { return metas_; }
  const std::vector<ShardDesc>& placement() const { return placement_; }
  const TableMeta& table(TableId id) const;
  const ServerStore& server(ServerId id) const;
  const std::map<ServerId, ServerStore>& servers() const { return servers_; }
  std::vector<ServerId> server_ids() const;

 private:
  uint64_t seed_ = 0;
  std::vector<TableMeta> metas_;
  std::vector<ShardDesc> placement_;
  std::map<ServerId, ServerStore> servers_;
};

}  // namespace embserve
