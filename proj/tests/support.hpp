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

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "ids.hpp"
#include "placement.hpp"
#include "store.hpp"

namespace embserve::testing {

inline TableMeta Table(uint32_t id, uint64_t rows, uint32_t dim) {
  return TableMeta{TableId(id), rows, dim};
}

inline ShardDesc Shard(uint32_t table, uint64_t start, uint64_t end, uint32_t server) {
  return ShardDesc{TableId(table), start, end, ServerId(server)};
}

// Random contiguous split of every table into up to `max_shards` shards on
// `servers` servers.
inline std::vector<ShardDesc> RandomPlacement(std::mt19937_64& rng,
                                              const std::vector<TableMeta>& metas,
                                              uint32_t servers, uint32_t max_shards) {
  std::vector<ShardDesc> out;
  for (const auto& m : metas) {
    const uint64_t k = 1 + rng() % std::min<uint64_t>(max_shards, m.num_rows);
    std::vector<uint64_t> cuts{0, m.num_rows};
    while (cuts.size() < k + 1) {
      const uint64_t c = 1 + rng() % (m.num_rows - 1 == 0 ? 1 : m.num_rows - 1);
      if (c < m.num_rows && std::find(cuts.begin(), cuts.end(), c) == cuts.end()) {
        cuts.push_back(c);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      out.push_back(ShardDesc{m.id, cuts[i], cuts[i + 1],
                              ServerId(static_cast<uint32_t>(rng() % servers))});
    }
  }
  return out;
}

// Reference server lookup by scanning every shard.
inline ServerId ScanPlacement(const std::vector<ShardDesc>& placement, TableId table,
                              RowIndex index) {
  for (const auto& s : placement) {
    if (s.table == table && index >= s.start && index < s.end) return s.host;
  }
  return ServerId(~0u);
}

}  // namespace embserve::testing
