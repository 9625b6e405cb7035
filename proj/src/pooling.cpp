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

#include "pooling.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "error.hpp"

namespace embserve {

Embedding PoolFlat(std::span<const Embedding> vectors, PoolingOp op) {
  if (vectors.empty()) Fail(ErrorCode::kValidation, "pool_flat: empty input");
  const size_t dim = vectors.front().size();
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      Fail(ErrorCode::kValidation,
           fmt::format("pool_flat: dim mismatch ({} vs {})", v.size(), dim));
    }
    for (size_t j = 0; j < dim; ++j) acc[j] += v[j];
  }
  Embedding out(dim);
  const double n = static_cast<double>(vectors.size());
  for (size_t j = 0; j < dim; ++j) {
    out[j] = static_cast<float>(op == PoolingOp::kMean ? acc[j] / n : acc[j]);
  }
  return out;
}

size_t PoolingPlan::pushdown_slices() const {
  size_t n = 0;
  for (const auto& g : modes) {
    n += static_cast<size_t>(std::count(g.begin(), g.end(), FetchMode::kPushdown));
  }
  return n;
}

PoolingPlan PlanHierarchical(std::span<const DestinationGroup> groups,
                             uint32_t threshold) {
  if (threshold < 2) {
    Fail(ErrorCode::kValidation,
         fmt::format("pushdown threshold must be >= 2, got {}", threshold));
  }
  PoolingPlan plan;
  plan.threshold = threshold;
  plan.modes.reserve(groups.size());
  for (const auto& g : groups) {
    auto& modes = plan.modes.emplace_back();
    modes.reserve(g.slices.size());
    for (const auto& s : g.slices) {
      modes.push_back(s.indices.size() >= threshold ? FetchMode::kPushdown
                                                    : FetchMode::kRawFetch);
    }
  }
  return plan;
}

Embedding CombinePartials(std::span<const PartialResult> partials,
                          std::span<const Embedding> raw, PoolingOp op) {
  if (partials.empty() && raw.empty()) {
    Fail(ErrorCode::kValidation, "combine_partials: no inputs");
  }
  const size_t dim = partials.empty() ? raw.front().size() : partials.front().vector.size();

  std::vector<size_t> order(partials.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return partials[a].source < partials[b].source;
  });

  std::vector<double> acc(dim, 0.0);
  uint64_t count = 0;
  auto add = [&](const Embedding& v) {
    if (v.size() != dim) {
      Fail(ErrorCode::kValidation,
           fmt::format("combine_partials: dim mismatch ({} vs {})", v.size(), dim));
    }
    for (size_t j = 0; j < dim; ++j) acc[j] += v[j];
  };
  for (size_t i : order) {
    if (partials[i].count == 0) {
      Fail(ErrorCode::kValidation, "combine_partials: partial with zero count");
    }
    add(partials[i].vector);
    count += partials[i].count;
  }
  for (const auto& v : raw) {
    add(v);
    ++count;
  }

  Embedding out(dim);
  for (size_t j = 0; j < dim; ++j) {
    out[j] = static_cast<float>(op == PoolingOp::kMean ? acc[j] / static_cast<double>(count)
                                                        : acc[j]);
  }
  return out;
}

uint64_t MessageSizeModel::RequestBytes(std::span<const size_t> slice_sizes) const {
  uint64_t bytes = header_bytes;
  for (size_t n : slice_sizes) bytes += slice_header_bytes + uint64_t{index_bytes} * n;
  return bytes;
}

uint64_t MessageSizeModel::SlicePayloadBytes(size_t rows, uint32_t dim, FetchMode mode) {
  const uint64_t vectors = mode == FetchMode::kPushdown ? 1 : rows;
  return vectors * dim * kElementWidth;
}

uint64_t MessageSizeModel::SliceResponseBytes(size_t rows, uint32_t dim,
                                              FetchMode mode) const {
  uint64_t bytes = slice_header_bytes + SlicePayloadBytes(rows, dim, mode);
  if (mode == FetchMode::kPushdown) bytes += count_bytes;
  return bytes;
}

}  // namespace embserve
