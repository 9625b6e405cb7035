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

namespace embserve {

struct RouteEntry {
  uint64_t start = 0;
  uint64_t end = 0;
  ServerId server;
};

// Range map from (table, row interval) to the embedding server hosting it.
// Immutable once built.
class RoutingTable {
 public:
  // Throws the same configuration errors as ValidatePlacement.
  static RoutingTable Build(std::span<const TableMeta> metas,
                            std::span<const ShardDesc> placement);

  // Ordered search over the table's intervals. When `comparisons` is
  // non-null it is incremented once per interval probed. Throws
  // Error(kValidation) for unknown tables or out-of-range indices.
  ServerId Resolve(TableId table, RowIndex index,
                   uint64_t* comparisons = nullptr) const;

  std::span<const RouteEntry> entries(TableId table) const;
  uint64_t num_rows(TableId table) const;
  bool has_table(TableId table) const { return routes_.count(table) != 0; }

 private:
  struct TableRoutes {
    uint64_t num_rows = 0;
    std::vector<RouteEntry> entries;
  };
  const TableRoutes& routes(TableId table) const;

  std::map<TableId, TableRoutes> routes_;
};

// The part of one feature that is routed to one server. `origins[i]` is the
// position of `indices[i]` within the feature's index list.
struct FeatureSlice {
  size_t feature = 0;
  TableId table;
  PoolingOp op = PoolingOp::kSum;
  std::vector<RowIndex> indices;
  std::vector<uint32_t> origins;
};

struct DestinationGroup {
  ServerId server;
  std::vector<FeatureSlice> slices;

  size_t total_indices() const;
};

// Per feature, per index position: true when the index is already served
// (cache hit) and must not be routed.
using ServedMask = std::vector<std::vector<bool>>;

// Groups the (unserved) indices of a lookup by destination server. Groups
// come out in ascending server order; slices in feature order; indices in
// request order.
std::vector<DestinationGroup> GroupByServer(const RoutingTable& routing,
                                            const LookupRequest& lookup,
                                            const ServedMask* served = nullptr);

}  // namespace embserve
