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

#include "lookup.hpp"

namespace embserve {

std::string_view PoolingOpName(PoolingOp op) {
  return op == PoolingOp::kMean ? "mean" : "sum";
}

std::optional<PoolingOp> ParsePoolingOp(std::string_view name) {
  if (name == "sum") return PoolingOp::kSum;
  if (name == "mean") return PoolingOp::kMean;
  return std::nullopt;
}

size_t LookupRequest::total_indices() const {
  size_t n = 0;
  for (const auto& f : features) n += f.indices.size();
  return n;
}

}  // namespace embserve
