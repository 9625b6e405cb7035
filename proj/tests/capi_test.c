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


#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "embserve/embserve.h"

static int failures = 0;

#define CHECK(cond)                                             \
  do {                                                          \
    if (!(cond)) {                                              \
      fprintf(stderr, "%s:%d: CHECK(%s)\n", __FILE__, __LINE__, \
              #cond);                                           \
      ++failures;                                               \
    }                                                           \
  } while (0)

static const char* kSmoke =
    "experiment:\n"
    "  verify: true\n"
    "store:\n"
    "  num_servers: 1\n"
    "  tables:\n"
    "    - {id: 0, rows: 1000, dim: 8}\n"
    "transport:\n"
    "  num_units: 2\n"
    "  num_engines: 2\n"
    "  num_connections: 4\n"
    "workload:\n"
    "  tables:\n"
    "    - {table: 0, zipf_alpha: 1.0, op: sum}\n"
    "  indices_min: 1\n"
    "  indices_max: 4\n"
    "  lookups_per_batch: 8\n"
    "  duration_batches: 30\n";

static void test_statuses(void) {
  CHECK(strcmp(embserve_status_name(EMBSERVE_OK), "ok") == 0);
  CHECK(strcmp(embserve_status_name(EMBSERVE_ERR_ROUTING), "routing-violation") == 0);
  CHECK(strlen(embserve_version()) > 0);
  CHECK(embserve_config_default(NULL) == EMBSERVE_ERR_ARGUMENT);
  CHECK(strstr(embserve_last_error(), "null") != NULL);
  CHECK(embserve_config_validate(NULL) == EMBSERVE_ERR_ARGUMENT);
  CHECK(embserve_trace_fingerprint(NULL) == 0);
  embserve_config_free(NULL);
  embserve_trace_free(NULL);
  embserve_report_free(NULL);
  embserve_string_free(NULL);
}

static void test_config_errors(void) {
  embserve_config* c = NULL;
  CHECK(embserve_config_parse("cache:\n  bogus: 1\n", &c) == EMBSERVE_ERR_CONFIG);
  CHECK(c == NULL);
  CHECK(strstr(embserve_last_error(), "cache.bogus") != NULL);
  CHECK(embserve_config_parse("store: [\n", &c) == EMBSERVE_ERR_PARSE);
  CHECK(embserve_config_load("/nonexistent/embserve.yaml", &c) == EMBSERVE_ERR_IO);
  CHECK(embserve_config_default(&c) == EMBSERVE_OK);
  CHECK(embserve_config_set_backend(c, "quantum") == EMBSERVE_ERR_CONFIG);
  CHECK(embserve_config_set_backend(c, "threaded") == EMBSERVE_OK);
  CHECK(embserve_config_validate(c) == EMBSERVE_OK);
  embserve_config_free(c);
}

static void test_run(void) {
  embserve_config* c = NULL;
  embserve_trace* t = NULL;
  embserve_trace* back = NULL;
  embserve_report* r1 = NULL;
  embserve_report* r2 = NULL;
  char* text = NULL;
  const char* path = "embserve_capi_test.trace";

  CHECK(embserve_config_parse(kSmoke, &c) == EMBSERVE_OK);
  CHECK(embserve_config_set_seed(c, 11) == EMBSERVE_OK);
  CHECK(embserve_config_to_text(c, &text) == EMBSERVE_OK);
  CHECK(text != NULL && strstr(text, "seed: 11") != NULL);
  embserve_string_free(text);

  CHECK(embserve_trace_generate(c, &t) == EMBSERVE_OK);
  CHECK(embserve_trace_batch_count(t) == 30);
  CHECK(embserve_trace_save(t, path) == EMBSERVE_OK);
  CHECK(embserve_trace_load(path, &back) == EMBSERVE_OK);
  CHECK(embserve_trace_fingerprint(back) == embserve_trace_fingerprint(t));
  CHECK(embserve_trace_generator(back) == embserve_trace_generator(t));

  CHECK(embserve_run(c, &r1) == EMBSERVE_OK);
  CHECK(embserve_config_set_trace(c, path) == EMBSERVE_OK);
  CHECK(embserve_run(c, &r2) == EMBSERVE_OK);
  CHECK(strstr(embserve_report_summary(r1), "\"conservation\": true") != NULL);
  CHECK(strstr(embserve_report_summary(r1), "\"passed\": true") != NULL);
  CHECK(strlen(embserve_report_text(r2)) > 0);

  CHECK(embserve_report_write(r1, "embserve_capi_a") == EMBSERVE_OK);
  CHECK(embserve_report_write(r2, "embserve_capi_b") == EMBSERVE_OK);
  {
    const char* paths[] = {"embserve_capi_a.json", "embserve_capi_b.json"};
    char* table = NULL;
    CHECK(embserve_compare_summaries(paths, 2, &table) == EMBSERVE_OK);
    CHECK(table != NULL && strstr(table, "embserve_capi_b") != NULL);
    embserve_string_free(table);
    CHECK(embserve_compare_summaries(paths, 2, NULL) == EMBSERVE_ERR_ARGUMENT);
  }
  CHECK(embserve_trace_load("embserve_capi_a.txt", &back) == EMBSERVE_ERR_PARSE);

  remove(path);
  remove("embserve_capi_a.json");
  remove("embserve_capi_a.txt");
  remove("embserve_capi_b.json");
  remove("embserve_capi_b.txt");
  embserve_report_free(r1);
  embserve_report_free(r2);
  embserve_trace_free(t);
  embserve_trace_free(back);
  embserve_config_free(c);
}

static void test_experiments(void) {
  size_t i;
  CHECK(embserve_experiment_count() == 5);
  for (i = 0; i < embserve_experiment_count(); ++i) {
    CHECK(strlen(embserve_experiment_name(i)) > 0);
    CHECK(strlen(embserve_experiment_description(i)) > 0);
  }
  CHECK(embserve_experiment_name(5) == NULL);
}

int main(void) {
  test_statuses();
  test_config_errors();
  test_run();
  test_experiments();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
