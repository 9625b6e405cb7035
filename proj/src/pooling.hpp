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
#include "lookup.hpp"
#include "routing.hpp"

namespace embserve {

// Server-side reduction of co-located rows. Carries the raw sum and the row
// count so that Mean can be recomposed exactly at the ranker.
struct PartialResult {
  Embedding vector;
  uint32_t count = 0;
  ServerId source;
};

// Sum accumulates in input order with 64-bit accumulators; Mean divides that
// sum by n. Throws Error(kValidation) on empty input or mismatched dims.
Embedding PoolFlat(std::span<const Embedding> vectors, PoolingOp op);

enum class FetchMode { kPushdown, kRawFetch };

struct PoolingPlan {
  uint32_t threshold = 2;
  // modes[g][s] is the fetch mode of slice s of destination group g.
  std::vector<std::vector<FetchMode>> modes;

  size_t pushdown_slices() const;
};

// A slice is pushed down when it holds at least `threshold` indices.
// `threshold` must be >= 2; kNoPushdown disables pushdown entirely.
PoolingPlan PlanHierarchical(std::span<const DestinationGroup> groups,
                             uint32_t threshold);

// Global pooling. Partials are combined in ascending source order, then raw
// vectors in the order given. Mean divides by the total row count.
Embedding CombinePartials(std::span<const PartialResult> partials,
                          std::span<const Embedding> raw, PoolingOp op);

// Byte accounting for subrequest and response messages.
struct MessageSizeModel {
  uint32_t header_bytes = 64;
  uint32_t slice_header_bytes = 8;
  uint32_t index_bytes = 8;
  uint32_t count_bytes = 4;
  uint32_t credit_bytes = 4;

  uint64_t RequestBytes(std::span<const size_t> slice_sizes) const;
  // Embedding payload (vector scalars only) of one slice's response.
  static uint64_t SlicePayloadBytes(size_t rows, uint32_t dim, FetchMode mode);
  // Wire bytes of one slice inside a response, excluding the message header.
  uint64_t SliceResponseBytes(size_t rows, uint32_t dim, FetchMode mode) const;
  uint64_t CreditMessageBytes() const { return header_bytes + credit_bytes; }
};

}  // namespace embserve
