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
#include <random>
#include <string>
#include <vector>

#include "ids.hpp"
#include "lookup.hpp"

namespace embserve {

// Exact inverse-CDF sampler over ranks [0, n) with P(k) proportional to
// (k + 1)^-alpha. alpha == 0 is uniform.
class ZipfSampler {
 public:
  ZipfSampler(uint64_t n, double alpha);

  uint64_t Sample(double u) const;
  double Pmf(uint64_t k) const;
  double Cdf(uint64_t k) const { return cdf_.at(k); }
  uint64_t size() const { return cdf_.size(); }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  std::vector<double> cdf_;
};

struct WorkloadTable {
  TableId table;
  uint64_t rows = 0;
  double zipf_alpha = 1.0;
  PoolingOp op = PoolingOp::kSum;

  bool operator==(const WorkloadTable&) const = default;
};

struct WorkloadConfig {
  std::vector<WorkloadTable> tables;
  // Every lookup has one feature per table.
  uint32_t indices_min = 8;
  uint32_t indices_max = 8;
  bool with_replacement = true;
  uint64_t lookups_per_batch = 64;
  // Batch b holds round(base * (1 + amplitude * sin(2 pi b / period))).
  double amplitude = 0.0;
  uint64_t period = 100;
  uint64_t duration_batches = 100;
  Tick batch_interval = 0;
  uint64_t seed = 1;
  // With probability locality_prob a feature takes a run of consecutive
  // rows starting at a Zipf-drawn row.
  double locality_prob = 0.0;
  // With probability cooccurrence_prob a feature is seeded with a group of
  // cooccurrence_group rows spread across the table. Unvalidated defaults.
  uint32_t cooccurrence_group = 0;
  double cooccurrence_prob = 0.0;

  bool operator==(const WorkloadConfig&) const = default;

  // Throws Error(kConfig) naming the offending field.
  void Validate() const;
  // Hash of every field, the seed included.
  uint64_t Fingerprint() const;
};

uint64_t BatchSizeAt(const WorkloadConfig& config, uint64_t batch);

struct Trace {
  std::vector<Batch> batches;
  // Fingerprint of the generating config; 0 when unknown.
  uint64_t generator = 0;

  // Content hash over every batch.
  uint64_t Fingerprint() const;
  bool operator==(const Trace&) const = default;
};

Trace GenerateTrace(const WorkloadConfig& config);

// Text format, one batch per line after a header:
//   embserve-trace v1 generator=<hex16> fingerprint=<hex16> batches=<n>
//   <id>\t<tick>\t<lookup>[\t<lookup>...]
// with lookup = feature[;feature...] and feature = table:sum|mean:i[,i...].
// fingerprint=none skips the content check.
std::string FormatTrace(const Trace& trace);
// Throws Error(kParse) with the line number and field on malformed input.
Trace ParseTrace(const std::string& text);
void SaveTrace(const Trace& trace, const std::string& path);
Trace LoadTrace(const std::string& path);

// Converting external traces (for example the public DLRM lookup traces)
// maps each sample to a lookup, each sparse feature to a table and each
// offset range to one feature's index list. Not implemented.

}  // namespace embserve
