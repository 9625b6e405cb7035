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
#include <string>
#include <vector>

#include "fabric.hpp"
#include "placement.hpp"
#include "ranker.hpp"
#include "workload.hpp"

namespace embserve {

struct StoreSettings {
  uint32_t num_servers = 4;
  uint32_t cpu_budget = 8;
  std::vector<TableMeta> tables;
  // Empty means an even split of every table over all servers.
  std::vector<ShardDesc> shards;

  std::vector<ShardDesc> ResolvedPlacement() const;
};

struct ExperimentConfig {
  std::string name = "default";
  std::string experiment = "replay";
  Backend backend = Backend::kVirtualTime;
  // Report path prefix; writes <output>.txt and <output>.json when set.
  std::string output;
  uint64_t seed = 1;
  // Replay: recompute every pooled vector flat and report the worst error.
  bool verify = false;

  StoreSettings store;
  RankerConfig ranker;
  TransportParams transport;
  // `tables[i].rows` is filled from the store section.
  WorkloadConfig workload;
  std::string trace_path;

  // Cross-section checks. Throws Error(kConfig) naming the field.
  void Validate() const;
  uint64_t Fingerprint() const;
  // Workload with rows and seed resolved from the other sections.
  WorkloadConfig ResolvedWorkload() const;
};

ExperimentConfig DefaultConfig();

// Overlays a YAML document on `base`; keys left out keep their base value.
// Unknown keys and type errors throw Error(kConfig) with the field path;
// YAML syntax errors throw Error(kParse).
ExperimentConfig ParseConfig(const std::string& text, const ExperimentConfig& base = DefaultConfig());
ExperimentConfig LoadConfig(const std::string& path);

// Every field, defaults included; round-trips through ParseConfig.
std::string ConfigToYaml(const ExperimentConfig& config);

Backend ParseBackend(const std::string& text);

}  // namespace embserve
