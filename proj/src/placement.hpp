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

struct TableMeta {
  TableId id;
  uint64_t num_rows = 0;
  uint32_t dim = 0;

  uint64_t row_bytes() const { return uint64_t{dim} * kElementWidth; }
};

// Half-open row range [start, end) of one table placed on one server.
struct ShardDesc {
  TableId table;
  uint64_t start = 0;
  uint64_t end = 0;
  ServerId host;

  bool operator==(const ShardDesc&) const = default;
};

// Checks table metadata and that every table's shards are disjoint and cover
// [0, num_rows). Throws Error(kConfig) naming the table and the offending
// gap or overlap.
void ValidatePlacement(std::span<const TableMeta> metas,
                       std::span<const ShardDesc> placement);

// Row-wise split of every table into `num_servers` contiguous shards. Shard k
// of table t lands on server (t + k) mod num_servers.
std::vector<ShardDesc> EvenPlacement(std::span<const TableMeta> metas,
                                     uint32_t num_servers);

const TableMeta* FindTable(std::span<const TableMeta> metas, TableId id);

}  // namespace embserve
