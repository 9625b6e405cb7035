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

#include "placement.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "error.hpp"

namespace embserve {

const TableMeta* FindTable(std::span<const TableMeta> metas, TableId id) {
  for (const auto& m : metas) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

void ValidatePlacement(std::span<const TableMeta> metas,
                       std::span<const ShardDesc> placement) {
  if (metas.empty()) Fail(ErrorCode::kConfig, "no tables configured");
  std::set<TableId> seen;
  for (const auto& m : metas) {
    if (!seen.insert(m.id).second) {
      Fail(ErrorCode::kConfig, fmt::format("table {}: duplicate table id", m.id.value));
    }
    if (m.num_rows < 1) {
      Fail(ErrorCode::kConfig, fmt::format("table {}: num_rows must be >= 1", m.id.value));
    }
    if (m.dim < 1) {
      Fail(ErrorCode::kConfig, fmt::format("table {}: dim must be >= 1", m.id.value));
    }
  }

  std::map<TableId, std::vector<const ShardDesc*>> by_table;
  for (const auto& s : placement) {
    const TableMeta* meta = FindTable(metas, s.table);
    if (meta == nullptr) {
      Fail(ErrorCode::kConfig,
           fmt::format("table {}: shard references unknown table", s.table.value));
    }
    if (s.start >= s.end) {
      Fail(ErrorCode::kConfig, fmt::format("table {}: empty shard [{},{})",
                                           s.table.value, s.start, s.end));
    }
    if (s.end > meta->num_rows) {
      Fail(ErrorCode::kConfig,
           fmt::format("table {}: shard [{},{}) exceeds num_rows {}", s.table.value,
                       s.start, s.end, meta->num_rows));
    }
    by_table[s.table].push_back(&s);
  }

  for (const auto& m : metas) {
    auto& shards = by_table[m.id];
    std::sort(shards.begin(), shards.end(), [](const ShardDesc* a, const ShardDesc* b) {
      return a->start < b->start;
    });
    uint64_t cursor = 0;
    for (const ShardDesc* s : shards) {
      if (s->start > cursor) {
        Fail(ErrorCode::kConfig,
             fmt::format("table {}: gap [{},{})", m.id.value, cursor, s->start));
      }
      if (s->start < cursor) {
        Fail(ErrorCode::kConfig,
             fmt::format("table {}: overlap at row {}", m.id.value, s->start));
      }
      cursor = s->end;
    }
    if (cursor < m.num_rows) {
      Fail(ErrorCode::kConfig,
           fmt::format("table {}: gap [{},{})", m.id.value, cursor, m.num_rows));
    }
  }
}

std::vector<ShardDesc> EvenPlacement(std::span<const TableMeta> metas,
                                     uint32_t num_servers) {
  if (num_servers == 0) Fail(ErrorCode::kConfig, "store.servers: must be >= 1");
  std::vector<ShardDesc> out;
  for (const auto& m : metas) {
    const uint64_t shards = std::min<uint64_t>(num_servers, m.num_rows);
    for (uint64_t k = 0; k < shards; ++k) {
      ShardDesc d;
      d.table = m.id;
      d.start = m.num_rows * k / shards;
      d.end = m.num_rows * (k + 1) / shards;
      d.host = ServerId(static_cast<uint32_t>((m.id.value + k) % num_servers));
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace embserve
