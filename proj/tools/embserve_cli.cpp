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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "embserve/embserve.h"

namespace {

int Report(embserve_status s) {
  std::fprintf(stderr, "error (%s): %s\n", embserve_status_name(s), embserve_last_error());
  return 1;
}

struct Owned {
  char* p = nullptr;
  ~Owned() { embserve_string_free(p); }
};

struct Common {
  std::string config;
  uint64_t seed = 0;
  bool has_seed = false;
  std::string backend;
  std::string out;
};

embserve_status LoadConfig(const Common& c, embserve_config** cfg) {
  embserve_status s = c.config.empty() ? embserve_config_default(cfg)
                                       : embserve_config_load(c.config.c_str(), cfg);
  if (s != EMBSERVE_OK) return s;
  if (c.has_seed && (s = embserve_config_set_seed(*cfg, c.seed)) != EMBSERVE_OK) return s;
  if (!c.backend.empty() &&
      (s = embserve_config_set_backend(*cfg, c.backend.c_str())) != EMBSERVE_OK) {
    return s;
  }
  return EMBSERVE_OK;
}

int Gen(const Common& c) {
  if (c.out.empty()) {
    std::fprintf(stderr, "gen: --out is required\n");
    return 2;
  }
  embserve_config* cfg = nullptr;
  embserve_status s = LoadConfig(c, &cfg);
  if (s != EMBSERVE_OK) return Report(s);
  embserve_trace* trace = nullptr;
  s = embserve_trace_generate(cfg, &trace);
  embserve_config_free(cfg);
  if (s != EMBSERVE_OK) return Report(s);
  s = embserve_trace_save(trace, c.out.c_str());
  if (s == EMBSERVE_OK) {
    std::printf("wrote %s: %zu batches, fingerprint %016llx, generator %016llx\n", c.out.c_str(),
                embserve_trace_batch_count(trace),
                static_cast<unsigned long long>(embserve_trace_fingerprint(trace)),
                static_cast<unsigned long long>(embserve_trace_generator(trace)));
  }
  embserve_trace_free(trace);
  return s == EMBSERVE_OK ? 0 : Report(s);
}

int Run(const Common& c, const std::string& experiment, const std::string& trace,
        bool print_defaults, bool quiet) {
  embserve_config* cfg = nullptr;
  embserve_status s = print_defaults ? embserve_config_default(&cfg) : LoadConfig(c, &cfg);
  if (s != EMBSERVE_OK) return Report(s);
  if (print_defaults) {
    Owned text;
    s = embserve_config_to_text(cfg, &text.p);
    embserve_config_free(cfg);
    if (s != EMBSERVE_OK) return Report(s);
    std::fputs(text.p, stdout);
    return 0;
  }
  if (!experiment.empty() &&
      (s = embserve_config_set_experiment(cfg, experiment.c_str())) != EMBSERVE_OK) {
    embserve_config_free(cfg);
    return Report(s);
  }
  if (!trace.empty() && (s = embserve_config_set_trace(cfg, trace.c_str())) != EMBSERVE_OK) {
    embserve_config_free(cfg);
    return Report(s);
  }
  std::string prefix = c.out;
  if (prefix.empty()) {
    Owned o;
    if (embserve_config_output(cfg, &o.p) == EMBSERVE_OK) prefix = o.p;
  }
  embserve_report* report = nullptr;
  s = embserve_run(cfg, &report);
  embserve_config_free(cfg);
  if (s != EMBSERVE_OK) return Report(s);
  if (!quiet) std::fputs(embserve_report_text(report), stdout);
  if (!prefix.empty()) {
    s = embserve_report_write(report, prefix.c_str());
    if (s == EMBSERVE_OK) std::fprintf(stderr, "wrote %s.txt and %s.json\n", prefix.c_str(), prefix.c_str());
  }
  embserve_report_free(report);
  return s == EMBSERVE_OK ? 0 : Report(s);
}

int Compare(const std::vector<std::string>& files) {
  std::vector<const char*> paths;
  for (const auto& f : files) paths.push_back(f.c_str());
  Owned table;
  const embserve_status s = embserve_compare_summaries(paths.data(), paths.size(), &table.p);
  if (s != EMBSERVE_OK) return Report(s);
  std::fputs(table.p, stdout);
  return 0;
}

int List() {
  for (size_t i = 0; i < embserve_experiment_count(); ++i) {
    std::printf("%-22s %s\n", embserve_experiment_name(i), embserve_experiment_description(i));
  }
  return 0;
}

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (YAML)");
  cmd->add_option_function<uint64_t>(
      "--seed", [&c](uint64_t v) { c.seed = v; c.has_seed = true; }, "override experiment.seed");
  cmd->add_option("--backend", c.backend, "virtual | threaded")
      ->check(CLI::IsMember({"virtual", "threaded"}));
  cmd->add_option("--out", c.out, "output path (trace file for gen, report prefix for run)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embserve: disaggregated embedding serving simulator"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common gen_opts;
  CLI::App* gen = app.add_subcommand("gen", "generate a workload trace from a config");
  AddCommon(gen, gen_opts);

  Common run_opts;
  std::string experiment;
  std::string trace;
  bool print_defaults = false;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "run an experiment and print its report");
  AddCommon(run, run_opts);
  run->add_option("--experiment", experiment, "override experiment.kind");
  run->add_option("--trace", trace, "replay this trace file");
  run->add_flag("--print-defaults", print_defaults, "print the default config and exit");
  run->add_flag("--quiet", quiet, "do not print the report");

  std::vector<std::string> summaries;
  CLI::App* report = app.add_subcommand("report", "compare machine summaries");
  report->add_option("summaries", summaries, "summary JSON files")->required();

  CLI::App* experiments = app.add_subcommand("experiments", "list the named experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen) return Gen(gen_opts);
  if (*run) return Run(run_opts, experiment, trace, print_defaults, quiet);
  if (*report) return Compare(summaries);
  if (*experiments) return List();
  return 2;
}
