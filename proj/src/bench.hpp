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

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace embserve {

struct ExperimentInfo {
  std::string name;
  std::string description;
};

// Named experiments, in listing order. "replay" is not included.
const std::vector<ExperimentInfo>& NamedExperiments();
bool IsKnownExperiment(const std::string& name);

struct MetricsReport {
  std::string experiment;
  // Deterministic for the virtual backend: a pure function of the config.
  nlohmann::json summary;
  std::string text;

  std::string SummaryText() const { return summary.dump(2) + "\n"; }
};

MetricsReport RunExperiment(const ExperimentConfig& config);

// Writes <prefix>.txt and <prefix>.json.
void WriteReport(const MetricsReport& report, const std::string& prefix);

// Side-by-side table of the headline statistics of several summaries.
std::string CompareSummaries(const std::vector<std::pair<std::string, nlohmann::json>>& runs);

}  // namespace embserve
