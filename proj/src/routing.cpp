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

#include "routing.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "error.hpp"

namespace embserve {

RoutingTable RoutingTable::Build(std::span<const TableMeta> metas,
                                 std::span<const ShardDesc> placement) {
  ValidatePlacement(metas, placement);
  RoutingTable rt;
  for (const auto& m : metas) rt.routes_[m.id].num_rows = m.num_rows;
  for (const auto& s : placement) {
    rt.routes_[s.table].entries.push_back(RouteEntry{s.start, s.end, s.host});
  }
  for (auto& [id, r] : rt.routes_) {
    std::sort(r.entries.begin(), r.entries.end(),
              [](const RouteEntry& a, const RouteEntry& b) { return a.start < b.start; });
  }
  return rt;
}

const RoutingTable::TableRoutes& RoutingTable::routes(TableId table) const {
  auto it = routes_.find(table);
  if (it == routes_.end()) {
    Fail(ErrorCode::kValidation, fmt::format("unknown table {}", table.value));
  }
  return it->second;
}

ServerId RoutingTable::Resolve(TableId table, RowIndex index,
                               uint64_t* comparisons) const {
  const TableRoutes& r = routes(table);
  if (index >= r.num_rows) {
    Fail(ErrorCode::kValidation,
         fmt::format("table {}: index {} out of range [0,{})", table.value, index,
                     r.num_rows));
  }
  // Find the last entry whose start <= index.
  size_t lo = 0;
  size_t hi = r.entries.size();
  while (hi - lo > 1) {
    const size_t mid = lo + (hi - lo) / 2;
    if (comparisons != nullptr) ++*comparisons;
    if (r.entries[mid].start <= index) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return r.entries[lo].server;
}

std::span<const RouteEntry> RoutingTable::entries(TableId table) const {
  return routes(table).entries;
}

uint64_t RoutingTable::num_rows(TableId table) const { return routes(table).num_rows; }

size_t DestinationGroup::total_indices() const {
  size_t n = 0;
  for (const auto& s : slices) n += s.indices.size();
  return n;
}

std::vector<DestinationGroup> GroupByServer(const RoutingTable& routing,
                                            const LookupRequest& lookup,
                                            const ServedMask* served) {
  std::map<ServerId, DestinationGroup> groups;
  for (size_t f = 0; f < lookup.features.size(); ++f) {
    const Feature& feature = lookup.features[f];
    for (size_t i = 0; i < feature.indices.size(); ++i) {
      if (served != nullptr && (*served)[f][i]) continue;
      ServerId server;
      try {
        server = routing.Resolve(feature.table, feature.indices[i]);
      } catch (const Error& e) {
        Fail(e.code(), fmt::format("feature {}: {}", f, e.what()));
      }
      DestinationGroup& g = groups[server];
      g.server = server;
      if (g.slices.empty() || g.slices.back().feature != f) {
        FeatureSlice slice;
        slice.feature = f;
        slice.table = feature.table;
        slice.op = feature.op;
        g.slices.push_back(std::move(slice));
      }
      g.slices.back().indices.push_back(feature.indices[i]);
      g.slices.back().origins.push_back(static_cast<uint32_t>(i));
    }
  }
  std::vector<DestinationGroup> out;
  out.reserve(groups.size());
  for (auto& [id, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace embserve
