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

#include "embserve/embserve.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "bench.hpp"
#include "config.hpp"
#include "error.hpp"
#include "workload.hpp"

struct embserve_config {
  embserve::ExperimentConfig value;
};
struct embserve_trace {
  embserve::Trace value;
};
struct embserve_report {
  embserve::MetricsReport value;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
embserve_status Guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EMBSERVE_OK;
  } catch (const embserve::Error& e) {
    g_last_error = e.what();
    return static_cast<embserve_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMBSERVE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMBSERVE_ERR_INTERNAL;
  }
}

void Require(const void* p, const char* what) {
  if (p == nullptr) embserve::Fail(embserve::ErrorCode::kArgument, std::string(what) + " is null");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* embserve_last_error(void) { return g_last_error.c_str(); }

const char* embserve_status_name(embserve_status status) {
  return embserve::ErrorCodeName(static_cast<embserve::ErrorCode>(status));
}

const char* embserve_version(void) { return "0.1.0"; }

embserve_status embserve_config_default(embserve_config** out) {
  return Guard([&] {
    Require(out, "out");
    *out = new embserve_config{embserve::DefaultConfig()};
  });
}

embserve_status embserve_config_load(const char* path, embserve_config** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new embserve_config{embserve::LoadConfig(path)};
  });
}

embserve_status embserve_config_parse(const char* text, embserve_config** out) {
  return Guard([&] {
    Require(text, "text");
    Require(out, "out");
    *out = new embserve_config{embserve::ParseConfig(text)};
  });
}

embserve_status embserve_config_set_seed(embserve_config* config, uint64_t seed) {
  return Guard([&] {
    Require(config, "config");
    config->value.seed = seed;
  });
}

embserve_status embserve_config_set_backend(embserve_config* config, const char* backend) {
  return Guard([&] {
    Require(config, "config");
    Require(backend, "backend");
    config->value.backend = embserve::ParseBackend(backend);
  });
}

embserve_status embserve_config_set_experiment(embserve_config* config, const char* name) {
  return Guard([&] {
    Require(config, "config");
    Require(name, "name");
    if (!embserve::IsKnownExperiment(name)) {
      embserve::Fail(embserve::ErrorCode::kConfig,
                     std::string("unknown experiment \"") + name + "\"");
    }
    config->value.experiment = name;
  });
}

embserve_status embserve_config_set_output(embserve_config* config, const char* prefix) {
  return Guard([&] {
    Require(config, "config");
    Require(prefix, "prefix");
    config->value.output = prefix;
  });
}

embserve_status embserve_config_set_trace(embserve_config* config, const char* path) {
  return Guard([&] {
    Require(config, "config");
    Require(path, "path");
    config->value.trace_path = path;
  });
}

embserve_status embserve_config_output(const embserve_config* config, char** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    *out = Dup(config->value.output);
  });
}

embserve_status embserve_config_to_text(const embserve_config* config, char** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    *out = Dup(embserve::ConfigToYaml(config->value));
  });
}

embserve_status embserve_config_validate(const embserve_config* config) {
  return Guard([&] {
    Require(config, "config");
    config->value.Validate();
  });
}

void embserve_config_free(embserve_config* config) { delete config; }

embserve_status embserve_trace_generate(const embserve_config* config, embserve_trace** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    config->value.Validate();
    *out = new embserve_trace{embserve::GenerateTrace(config->value.ResolvedWorkload())};
  });
}

embserve_status embserve_trace_load(const char* path, embserve_trace** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new embserve_trace{embserve::LoadTrace(path)};
  });
}

embserve_status embserve_trace_save(const embserve_trace* trace, const char* path) {
  return Guard([&] {
    Require(trace, "trace");
    Require(path, "path");
    embserve::SaveTrace(trace->value, path);
  });
}

uint64_t embserve_trace_fingerprint(const embserve_trace* trace) {
  return trace ? trace->value.Fingerprint() : 0;
}

uint64_t embserve_trace_generator(const embserve_trace* trace) {
  return trace ? trace->value.generator : 0;
}

size_t embserve_trace_batch_count(const embserve_trace* trace) {
  return trace ? trace->value.batches.size() : 0;
}

void embserve_trace_free(embserve_trace* trace) { delete trace; }

embserve_status embserve_run(const embserve_config* config, embserve_report** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    auto* r = new embserve_report{embserve::RunExperiment(config->value), {}};
    r->summary = r->value.SummaryText();
    *out = r;
  });
}

const char* embserve_report_summary(const embserve_report* report) {
  return report ? report->summary.c_str() : "";
}

const char* embserve_report_text(const embserve_report* report) {
  return report ? report->value.text.c_str() : "";
}

embserve_status embserve_report_write(const embserve_report* report, const char* prefix) {
  return Guard([&] {
    Require(report, "report");
    Require(prefix, "prefix");
    embserve::WriteReport(report->value, prefix);
  });
}

void embserve_report_free(embserve_report* report) { delete report; }

size_t embserve_experiment_count(void) { return embserve::NamedExperiments().size(); }

const char* embserve_experiment_name(size_t index) {
  const auto& list = embserve::NamedExperiments();
  return index < list.size() ? list[index].name.c_str() : nullptr;
}

const char* embserve_experiment_description(size_t index) {
  const auto& list = embserve::NamedExperiments();
  return index < list.size() ? list[index].description.c_str() : nullptr;
}

embserve_status embserve_compare_summaries(const char* const* paths, size_t count, char** out) {
  return Guard([&] {
    Require(out, "out");
    if (count > 0) Require(paths, "paths");
    std::vector<std::pair<std::string, nlohmann::json>> runs;
    for (size_t i = 0; i < count; ++i) {
      Require(paths[i], "path");
      std::ifstream in(paths[i], std::ios::binary);
      if (!in) {
        embserve::Fail(embserve::ErrorCode::kIo, std::string("cannot read summary ") + paths[i]);
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      auto j = nlohmann::json::parse(ss.str(), nullptr, false);
      if (j.is_discarded()) {
        embserve::Fail(embserve::ErrorCode::kParse, std::string(paths[i]) + ": invalid JSON");
      }
      runs.emplace_back(paths[i], std::move(j));
    }
    *out = Dup(embserve::CompareSummaries(runs));
  });
}

void embserve_string_free(char* s) { std::free(s); }

}  // extern "C"
