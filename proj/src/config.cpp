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

#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "error.hpp"
#include "hash.hpp"

namespace embserve {

std::vector<ShardDesc> StoreSettings::ResolvedPlacement() const {
  return shards.empty() ? EvenPlacement(tables, num_servers) : shards;
}

ExperimentConfig DefaultConfig() {
  ExperimentConfig c;
  c.store.tables = {TableMeta{TableId(0), 100000, 32}, TableMeta{TableId(1), 50000, 32}};

  // A scaled-down GPU: 8 MiB total, 1 MiB fixed NN state, 8 KiB per sample.
  CacheSettings& cache = c.ranker.cache;
  cache.memory = MemoryModel{8.0 * 1024 * 1024, 1.0 * 1024 * 1024, 8.0 * 1024};
  cache.policy.max_cache_bytes = 4u << 20;
  cache.policy.hysteresis = 0.05;
  cache.initial_bytes = 1u << 20;
  cache.window = 16;
  cache.low_watermark = 200;
  cache.high_watermark = 300;

  c.workload.tables = {WorkloadTable{TableId(0), 0, 1.0, PoolingOp::kSum},
                       WorkloadTable{TableId(1), 0, 0.8, PoolingOp::kMean}};
  c.workload.indices_min = 4;
  c.workload.indices_max = 16;
  c.workload.lookups_per_batch = 256;
  c.workload.amplitude = 0.5;
  c.workload.period = 64;
  c.workload.duration_batches = 128;
  c.workload.batch_interval = 20000;
  return c;
}

Backend ParseBackend(const std::string& text) {
  if (text == "virtual") return Backend::kVirtualTime;
  if (text == "threaded") return Backend::kThreaded;
  Fail(ErrorCode::kConfig, fmt::format("backend: expected virtual or threaded, got \"{}\"", text));
}

namespace {

template <typename T>
const char* TypeName() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else return "a string";
}

class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      Fail(ErrorCode::kConfig, fmt::format("{}: expected a mapping", Where()));
    }
  }

  std::string Field(const std::string& key) const {
    return path_.empty() ? key : fmt::format("{}.{}", path_, key);
  }

  YAML::Node Raw(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    return node_[key];
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    YAML::Node v = Raw(key);
    if (!v) return;
    out = Convert<T>(v, Field(key));
  }

  template <typename T>
  static T Convert(const YAML::Node& v, const std::string& field) {
    if (!v.IsScalar()) {
      Fail(ErrorCode::kConfig, fmt::format("{}: expected {}", field, TypeName<T>()));
    }
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.Scalar().empty() && v.Scalar()[0] == '-') {
        Fail(ErrorCode::kConfig,
             fmt::format("{}: expected {}, got \"{}\"", field, TypeName<T>(), v.Scalar()));
      }
    }
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      Fail(ErrorCode::kConfig,
           fmt::format("{}: expected {}, got \"{}\"", field, TypeName<T>(), v.Scalar()));
    }
  }

  Section Child(const std::string& key) { return Section(Raw(key), Field(key)); }

  void Finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) {
        Fail(ErrorCode::kConfig, fmt::format("{}: unknown key", Field(key)));
      }
    }
  }

 private:
  std::string Where() const { return path_.empty() ? "config" : path_; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void GetEnum(Section& s, const std::string& key, E& out, Parse parse) {
  std::string text;
  s.Get(key, text);
  if (!text.empty()) out = parse(text, s.Field(key));
}

std::vector<YAML::Node> List(Section& s, const std::string& key, bool* present) {
  YAML::Node v = s.Raw(key);
  *present = static_cast<bool>(v) && !v.IsNull();
  if (!*present) return {};
  if (!v.IsSequence()) Fail(ErrorCode::kConfig, fmt::format("{}: expected a list", s.Field(key)));
  return std::vector<YAML::Node>(v.begin(), v.end());
}

PoolingOp ParseOp(const std::string& text, const std::string& field) {
  auto op = ParsePoolingOp(text);
  if (!op) Fail(ErrorCode::kConfig, fmt::format("{}: expected sum or mean, got \"{}\"", field, text));
  return *op;
}

void ParseExperiment(Section s, ExperimentConfig& c) {
  s.Get("name", c.name);
  s.Get("kind", c.experiment);
  GetEnum(s, "backend", c.backend, [](const std::string& t, const std::string& f) {
    if (t == "virtual") return Backend::kVirtualTime;
    if (t == "threaded") return Backend::kThreaded;
    Fail(ErrorCode::kConfig, fmt::format("{}: expected virtual or threaded, got \"{}\"", f, t));
  });
  s.Get("output", c.output);
  s.Get("seed", c.seed);
  s.Get("verify", c.verify);
  s.Finish();
}

void ParseStore(Section s, StoreSettings& st) {
  s.Get("num_servers", st.num_servers);
  s.Get("cpu_budget", st.cpu_budget);
  bool present = false;
  auto tables = List(s, "tables", &present);
  if (present) {
    st.tables.clear();
    for (size_t i = 0; i < tables.size(); ++i) {
      Section t(tables[i], fmt::format("{}[{}]", s.Field("tables"), i));
      TableMeta m;
      uint32_t id = static_cast<uint32_t>(i);
      t.Get("id", id);
      m.id = TableId(id);
      t.Get("rows", m.num_rows);
      t.Get("dim", m.dim);
      t.Finish();
      st.tables.push_back(m);
    }
  }
  auto shards = List(s, "shards", &present);
  if (present) {
    st.shards.clear();
    for (size_t i = 0; i < shards.size(); ++i) {
      Section t(shards[i], fmt::format("{}[{}]", s.Field("shards"), i));
      uint32_t table = 0;
      uint32_t server = 0;
      ShardDesc d;
      t.Get("table", table);
      t.Get("start", d.start);
      t.Get("end", d.end);
      t.Get("server", server);
      t.Finish();
      d.table = TableId(table);
      d.host = ServerId(server);
      st.shards.push_back(d);
    }
  }
  s.Finish();
}

void ParsePooling(Section s, RankerConfig& r) {
  YAML::Node v = s.Raw("pushdown_threshold");
  if (v) {
    if (v.IsScalar() && v.Scalar() == "none") {
      r.pushdown_threshold = kNoPushdown;
    } else {
      r.pushdown_threshold = Section::Convert<uint32_t>(v, s.Field("pushdown_threshold"));
    }
  }
  s.Finish();
}

void ParseCache(Section s, CacheSettings& c) {
  s.Get("enabled", c.enabled);
  s.Get("adaptive", c.adaptive);
  s.Get("initial_bytes", c.initial_bytes);
  s.Get("gpu_capacity_bytes", c.memory.gpu_capacity_bytes);
  s.Get("nn_fixed_bytes", c.memory.nn_fixed_bytes);
  s.Get("nn_per_sample_bytes", c.memory.nn_per_sample_bytes);
  s.Get("max_cache_bytes", c.policy.max_cache_bytes);
  s.Get("hysteresis", c.policy.hysteresis);
  s.Get("window", c.window);
  s.Get("low_watermark", c.low_watermark);
  s.Get("high_watermark", c.high_watermark);
  GetEnum(s, "statistic", c.statistic, [](const std::string& t, const std::string& f) {
    if (t == "mean") return WindowStatistic::kMean;
    if (t == "max") return WindowStatistic::kMax;
    Fail(ErrorCode::kConfig, fmt::format("{}: expected mean or max, got \"{}\"", f, t));
  });
  s.Get("pooled_entries", c.pooled_entries);
  s.Get("sketch_keys", c.sketch_keys);
  s.Get("sketch_decay", c.sketch_decay);
  s.Finish();
}

void ParseTransport(Section s, TransportParams& t) {
  s.Get("num_units", t.num_units);
  s.Get("num_engines", t.num_engines);
  s.Get("num_connections", t.num_connections);
  GetEnum(s, "assignment", t.assignment, [](const std::string& v, const std::string& f) {
    if (v == "naive") return AssignmentPolicy::kNaive;
    if (v == "mapping-aware") return AssignmentPolicy::kMappingAware;
    Fail(ErrorCode::kConfig, fmt::format("{}: expected naive or mapping-aware, got \"{}\"", f, v));
  });
  s.Get("base_service_time", t.base_service_time);
  s.Get("lock_overhead", t.lock_overhead);
  s.Get("propagation_delay", t.propagation_delay);
  s.Get("link_gbps", t.link_gbps);
  s.Get("queue_capacity", t.queue_capacity);
  GetEnum(s, "credit_mode", t.credit_mode, [](const std::string& v, const std::string& f) {
    if (v == "fast-channel") return CreditMode::kFastChannel;
    if (v == "piggyback-only") return CreditMode::kPiggybackOnly;
    Fail(ErrorCode::kConfig,
         fmt::format("{}: expected fast-channel or piggyback-only, got \"{}\"", f, v));
  });
  s.Get("credit_grace", t.credit_grace);
  s.Get("rebalance", t.rebalance);
  s.Get("rebalance_period", t.rebalance_policy.period);
  s.Get("imbalance_factor", t.rebalance_policy.imbalance_factor);
  s.Get("max_migrations_per_tick", t.rebalance_policy.max_migrations_per_tick);
  s.Get("migration_cost", t.migration_cost);
  s.Get("sample_period", t.sample_period);
  s.Get("server_task_cost", t.server_task_cost);
  s.Get("server_pool_row_cost", t.server_pool_row_cost);
  s.Get("server_raw_row_cost", t.server_raw_row_cost);
  s.Get("ranker_workers", t.ranker_workers);
  s.Get("ranker_response_cost", t.ranker_response_cost);
  s.Get("ranker_bytes_per_ns", t.ranker_bytes_per_ns);
  s.Get("header_bytes", t.sizes.header_bytes);
  s.Get("slice_header_bytes", t.sizes.slice_header_bytes);
  s.Get("index_bytes", t.sizes.index_bytes);
  s.Get("count_bytes", t.sizes.count_bytes);
  s.Get("credit_bytes", t.sizes.credit_bytes);
  s.Finish();
}

void ParseRanker(Section s, RankerConfig& r) {
  s.Get("pipeline_depth", r.pipeline_depth);
  s.Get("aggregation_base_cost", r.aggregation_base_cost);
  s.Get("aggregation_vector_cost", r.aggregation_vector_cost);
  s.Finish();
}

void ParseWorkload(Section s, ExperimentConfig& c) {
  WorkloadConfig& w = c.workload;
  s.Get("trace", c.trace_path);
  bool present = false;
  auto tables = List(s, "tables", &present);
  if (present) {
    w.tables.clear();
    for (size_t i = 0; i < tables.size(); ++i) {
      Section t(tables[i], fmt::format("{}[{}]", s.Field("tables"), i));
      WorkloadTable wt;
      uint32_t id = static_cast<uint32_t>(i);
      t.Get("table", id);
      wt.table = TableId(id);
      t.Get("zipf_alpha", wt.zipf_alpha);
      GetEnum(t, "op", wt.op, ParseOp);
      t.Finish();
      w.tables.push_back(wt);
    }
  }
  s.Get("indices_min", w.indices_min);
  s.Get("indices_max", w.indices_max);
  s.Get("with_replacement", w.with_replacement);
  s.Get("lookups_per_batch", w.lookups_per_batch);
  s.Get("amplitude", w.amplitude);
  s.Get("period", w.period);
  s.Get("duration_batches", w.duration_batches);
  s.Get("batch_interval", w.batch_interval);
  s.Get("locality_prob", w.locality_prob);
  s.Get("cooccurrence_group", w.cooccurrence_group);
  s.Get("cooccurrence_prob", w.cooccurrence_prob);
  s.Finish();
}

std::string Num(double v) { return fmt::format("{}", v); }

}  // namespace

ExperimentConfig ParseConfig(const std::string& text, const ExperimentConfig& base) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    Fail(ErrorCode::kParse, fmt::format("config line {}, column {}: {}", e.mark.line + 1,
                                        e.mark.column + 1, e.msg));
  }
  ExperimentConfig c = base;
  Section top(root, "");
  ParseExperiment(top.Child("experiment"), c);
  ParseStore(top.Child("store"), c.store);
  ParsePooling(top.Child("pooling"), c.ranker);
  ParseCache(top.Child("cache"), c.ranker.cache);
  ParseTransport(top.Child("transport"), c.transport);
  ParseRanker(top.Child("ranker"), c.ranker);
  ParseWorkload(top.Child("workload"), c);
  top.Finish();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read config {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ParseConfig(ss.str());
  } catch (const Error& e) {
    Fail(e.code(), fmt::format("{}: {}", path, e.what()));
  }
}

std::string ConfigToYaml(const ExperimentConfig& c) {
  std::string o;
  auto line = [&](std::string_view indent, std::string_view key, const std::string& value) {
    o += fmt::format("{}{}: {}\n", indent, key, value);
  };
  auto str = [](const std::string& s) { return fmt::format("\"{}\"", s); };
  const std::string_view in = "  ";

  o += "experiment:\n";
  line(in, "name", str(c.name));
  line(in, "kind", c.experiment);
  line(in, "backend", std::string(BackendName(c.backend)));
  line(in, "output", str(c.output));
  line(in, "seed", fmt::format("{}", c.seed));
  line(in, "verify", c.verify ? "true" : "false");

  o += "store:\n";
  line(in, "num_servers", fmt::format("{}", c.store.num_servers));
  line(in, "cpu_budget", fmt::format("{}", c.store.cpu_budget));
  o += "  tables:\n";
  for (const auto& t : c.store.tables) {
    o += fmt::format("    - {{id: {}, rows: {}, dim: {}}}\n", t.id.value, t.num_rows, t.dim);
  }
  if (c.store.shards.empty()) {
    o += "  shards: []  # even split\n";
  } else {
    o += "  shards:\n";
    for (const auto& s : c.store.shards) {
      o += fmt::format("    - {{table: {}, start: {}, end: {}, server: {}}}\n", s.table.value,
                       s.start, s.end, s.host.value);
    }
  }

  o += "pooling:\n";
  line(in, "pushdown_threshold", c.ranker.pushdown_threshold == kNoPushdown
                                     ? std::string("none")
                                     : fmt::format("{}", c.ranker.pushdown_threshold));

  const CacheSettings& k = c.ranker.cache;
  o += "cache:\n";
  line(in, "enabled", k.enabled ? "true" : "false");
  line(in, "adaptive", k.adaptive ? "true" : "false");
  line(in, "initial_bytes", fmt::format("{}", k.initial_bytes));
  line(in, "gpu_capacity_bytes", Num(k.memory.gpu_capacity_bytes));
  line(in, "nn_fixed_bytes", Num(k.memory.nn_fixed_bytes));
  line(in, "nn_per_sample_bytes", Num(k.memory.nn_per_sample_bytes));
  line(in, "max_cache_bytes", fmt::format("{}", k.policy.max_cache_bytes));
  line(in, "hysteresis", Num(k.policy.hysteresis));
  line(in, "window", fmt::format("{}", k.window));
  line(in, "low_watermark", Num(k.low_watermark));
  line(in, "high_watermark", Num(k.high_watermark));
  line(in, "statistic", k.statistic == WindowStatistic::kMean ? "mean" : "max");
  line(in, "pooled_entries", k.pooled_entries ? "true" : "false");
  line(in, "sketch_keys", fmt::format("{}", k.sketch_keys));
  line(in, "sketch_decay", fmt::format("{}", k.sketch_decay));

  const TransportParams& t = c.transport;
  o += "transport:\n";
  line(in, "num_units", fmt::format("{}", t.num_units));
  line(in, "num_engines", fmt::format("{}", t.num_engines));
  line(in, "num_connections", fmt::format("{}", t.num_connections));
  line(in, "assignment", std::string(AssignmentPolicyName(t.assignment)));
  line(in, "base_service_time", fmt::format("{}", t.base_service_time));
  line(in, "lock_overhead", fmt::format("{}", t.lock_overhead));
  line(in, "propagation_delay", fmt::format("{}", t.propagation_delay));
  line(in, "link_gbps", Num(t.link_gbps));
  line(in, "queue_capacity", fmt::format("{}", t.queue_capacity));
  line(in, "credit_mode", std::string(CreditModeName(t.credit_mode)));
  line(in, "credit_grace", fmt::format("{}", t.credit_grace));
  line(in, "rebalance", t.rebalance ? "true" : "false");
  line(in, "rebalance_period", fmt::format("{}", t.rebalance_policy.period));
  line(in, "imbalance_factor", Num(t.rebalance_policy.imbalance_factor));
  line(in, "max_migrations_per_tick", fmt::format("{}", t.rebalance_policy.max_migrations_per_tick));
  line(in, "migration_cost", fmt::format("{}", t.migration_cost));
  line(in, "sample_period", fmt::format("{}", t.sample_period));
  line(in, "server_task_cost", fmt::format("{}", t.server_task_cost));
  line(in, "server_pool_row_cost", fmt::format("{}", t.server_pool_row_cost));
  line(in, "server_raw_row_cost", fmt::format("{}", t.server_raw_row_cost));
  line(in, "ranker_workers", fmt::format("{}", t.ranker_workers));
  line(in, "ranker_response_cost", fmt::format("{}", t.ranker_response_cost));
  line(in, "ranker_bytes_per_ns", Num(t.ranker_bytes_per_ns));
  line(in, "header_bytes", fmt::format("{}", t.sizes.header_bytes));
  line(in, "slice_header_bytes", fmt::format("{}", t.sizes.slice_header_bytes));
  line(in, "index_bytes", fmt::format("{}", t.sizes.index_bytes));
  line(in, "count_bytes", fmt::format("{}", t.sizes.count_bytes));
  line(in, "credit_bytes", fmt::format("{}", t.sizes.credit_bytes));

  o += "ranker:\n";
  line(in, "pipeline_depth", fmt::format("{}", c.ranker.pipeline_depth));
  line(in, "aggregation_base_cost", fmt::format("{}", c.ranker.aggregation_base_cost));
  line(in, "aggregation_vector_cost", fmt::format("{}", c.ranker.aggregation_vector_cost));

  const WorkloadConfig& w = c.workload;
  o += "workload:\n";
  line(in, "trace", str(c.trace_path));
  o += "  tables:\n";
  for (const auto& wt : w.tables) {
    o += fmt::format("    - {{table: {}, zipf_alpha: {}, op: {}}}\n", wt.table.value,
                     Num(wt.zipf_alpha), PoolingOpName(wt.op));
  }
  line(in, "indices_min", fmt::format("{}", w.indices_min));
  line(in, "indices_max", fmt::format("{}", w.indices_max));
  line(in, "with_replacement", w.with_replacement ? "true" : "false");
  line(in, "lookups_per_batch", fmt::format("{}", w.lookups_per_batch));
  line(in, "amplitude", Num(w.amplitude));
  line(in, "period", fmt::format("{}", w.period));
  line(in, "duration_batches", fmt::format("{}", w.duration_batches));
  line(in, "batch_interval", fmt::format("{}", w.batch_interval));
  line(in, "locality_prob", Num(w.locality_prob));
  line(in, "cooccurrence_group", fmt::format("{}", w.cooccurrence_group));
  line(in, "cooccurrence_prob", Num(w.cooccurrence_prob));
  return o;
}

WorkloadConfig ExperimentConfig::ResolvedWorkload() const {
  WorkloadConfig w = workload;
  w.seed = seed;
  for (auto& t : w.tables) {
    for (const auto& m : store.tables) {
      if (m.id == t.table) t.rows = m.num_rows;
    }
  }
  return w;
}

void ExperimentConfig::Validate() const {
  if (store.num_servers < 1) Fail(ErrorCode::kConfig, "store.num_servers: must be >= 1");
  if (store.tables.empty()) Fail(ErrorCode::kConfig, "store.tables: at least one table is required");
  ValidatePlacement(store.tables, store.ResolvedPlacement());
  for (const auto& s : store.shards) {
    if (s.host.value >= store.num_servers) {
      Fail(ErrorCode::kConfig, fmt::format("store.shards: server {} is outside num_servers={}",
                                           s.host.value, store.num_servers));
    }
  }
  if (trace_path.empty()) {
    for (size_t i = 0; i < workload.tables.size(); ++i) {
      const TableId id = workload.tables[i].table;
      bool found = false;
      for (const auto& m : store.tables) found = found || m.id == id;
      if (!found) {
        Fail(ErrorCode::kConfig,
             fmt::format("workload.tables[{}].table: table {} is not in store.tables", i,
                         id.value));
      }
    }
    ResolvedWorkload().Validate();
  }
  transport.Validate();
  if (ranker.pushdown_threshold < 2) {
    Fail(ErrorCode::kConfig, "pooling.pushdown_threshold: must be >= 2 or none");
  }
  if (ranker.pipeline_depth < 1) Fail(ErrorCode::kConfig, "ranker.pipeline_depth: must be >= 1");
  const CacheSettings& k = ranker.cache;
  k.memory.Validate();
  if (k.window < 1) Fail(ErrorCode::kConfig, "cache.window: must be >= 1");
  if (k.low_watermark > k.high_watermark) {
    Fail(ErrorCode::kConfig, "cache.low_watermark: must not exceed high_watermark");
  }
  if (k.policy.hysteresis < 0) Fail(ErrorCode::kConfig, "cache.hysteresis: must be >= 0");
}

uint64_t ExperimentConfig::Fingerprint() const {
  Fnv1a64 h;
  h.Update(std::string_view(ConfigToYaml(*this)));
  return h.digest();
}

}  // namespace embserve
