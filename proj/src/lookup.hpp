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
#include <optional>
#include <string_view>
#include <vector>

#include "ids.hpp"

namespace embserve {

using Embedding = std::vector<float>;

enum class PoolingOp { kSum, kMean };

std::string_view PoolingOpName(PoolingOp op);
std::optional<PoolingOp> ParsePoolingOp(std::string_view name);

// One sparse feature of a lookup: the rows of one table to be pooled.
struct Feature {
  TableId table;
  PoolingOp op = PoolingOp::kSum;
  std::vector<RowIndex> indices;

  bool operator==(const Feature&) const = default;
};

struct LookupRequest {
  std::vector<Feature> features;

  bool operator==(const LookupRequest&) const = default;
  size_t total_indices() const;
};

struct Batch {
  uint64_t id = 0;
  Tick arrival = 0;
  std::vector<LookupRequest> lookups;

  bool operator==(const Batch&) const = default;
  size_t size() const { return lookups.size(); }
};

}  // namespace embserve
