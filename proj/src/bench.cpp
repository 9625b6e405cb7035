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

#include "bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "error.hpp"
#include "sim_fabric.hpp"
#include "store.hpp"

namespace embserve {

using nlohmann::json;

const std::vector<ExperimentInfo>& NamedExperiments() {
  static const std::vector<ExperimentInfo> kList = {
      {"fig5-contention",
       "cache size vs. maximum batch size; adaptive vs. fixed cache under a load peak"},
      {"fig6-left-throughput", "message throughput with naive vs. mapping-aware engine assignment"},
      {"fig6-right-credit", "credit delivery latency under saturation, piggyback vs. fast channel"},
      {"pooling-bytes", "embedding payload bytes with and without partial pooling on servers"},
      {"migration-balance", "engine backlog imbalance on a skewed load, with and without migration"},
  };
  return kList;
}

bool IsKnownExperiment(const std::string& name) {
  if (name == "replay") return true;
  for (const auto& e : NamedExperiments()) {
    if (e.name == name) return true;
  }
  return false;
}

namespace {

std::string Hex(uint64_t v) { return fmt::format("{:016x}", v); }

double Percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<size_t>(rank, 1, v.size()) - 1];
}

json Distribution(const std::vector<double>& v) {
  const double mean =
      v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return json{{"p50", Percentile(v, 50)}, {"p95", Percentile(v, 95)},
              {"p99", Percentile(v, 99)}, {"mean", mean}};
}

// Keeps at most `n` evenly spaced points.
template <typename T>
std::vector<T> Downsample(const std::vector<T>& v, size_t n) {
  if (v.size() <= n) return v;
  std::vector<T> out;
  for (size_t i = 0; i < n; ++i) out.push_back(v[i * v.size() / n]);
  return out;
}

json FlowControl(const TransportStats& s) {
  return json{{"checks", s.flow_control_checks},
              {"fifo_checks", s.fifo_checks},
              {"violations", 0},
              {"drops", s.drops},
              {"submitted", s.submitted},
              {"completed", s.completed},
              {"incomplete", s.submitted - s.completed},
              {"max_task_queue", s.max_task_queue}};
}

std::vector<ServerId> SyntheticPeers(const ExperimentConfig& c) {
  std::vector<ServerId> out;
  for (uint32_t i = 0; i < c.store.num_servers; ++i) out.push_back(ServerId(i));
  return out;
}

Deployment BuildDeployment(const ExperimentConfig& c) {
  return Deployment::Init(c.store.tables, c.store.ResolvedPlacement(), c.seed, c.store.cpu_budget);
}

void RequireVirtual(const ExperimentConfig& c) {
  if (c.backend != Backend::kVirtualTime) {
    Fail(ErrorCode::kConfig,
         fmt::format("experiment.backend: {} runs on the virtual backend only", c.experiment));
  }
}

void PreflightTrace(const ExperimentConfig& c, const Trace& trace) {
  std::map<TableId, uint64_t> rows;
  for (const auto& t : c.store.tables) rows[t.id] = t.num_rows;
  for (const auto& b : trace.batches) {
    for (size_t l = 0; l < b.lookups.size(); ++l) {
      for (size_t f = 0; f < b.lookups[l].features.size(); ++f) {
        const Feature& feat = b.lookups[l].features[f];
        auto it = rows.find(feat.table);
        if (it == rows.end()) {
          Fail(ErrorCode::kConfig,
               fmt::format("trace batch {} lookup {} feature {}: table {} is not in store.tables",
                           b.id, l, f, feat.table.value));
        }
        for (RowIndex r : feat.indices) {
          if (r >= it->second) {
            Fail(ErrorCode::kConfig,
                 fmt::format("trace batch {} lookup {} feature {}: index {} outside table {} "
                             "[0,{})",
                             b.id, l, f, r, feat.table.value, it->second));
          }
        }
      }
    }
  }
}

struct Part {
  json data;
  json headline;
  std::string text;
};

std::string Row(const std::vector<std::string>& cells, const std::vector<size_t>& widths) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    out += fmt::format("{:<{}}", cells[i], widths[i] + 2);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out + "\n";
}

std::string Table(const std::string& title, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> w(header.size());
  for (size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
  }
  std::string out = fmt::format("== {} ==\n", title);
  out += Row(header, w);
  std::vector<std::string> rule;
  for (size_t x : w) rule.push_back(std::string(x, '-'));
  out += Row(rule, w);
  for (const auto& r : rows) out += Row(r, w);
  return out + "\n";
}

std::string F(double v) { return fmt::format("{:.4g}", v); }

// ---------------------------------------------------------------- replay

Part Replay(const ExperimentConfig& c, json& fingerprints) {
  const Deployment dep = BuildDeployment(c);
  Trace trace;
  if (!c.trace_path.empty()) {
    trace = LoadTrace(c.trace_path);
  } else {
    trace = GenerateTrace(c.ResolvedWorkload());
  }
  PreflightTrace(c, trace);
  fingerprints["trace"] = Hex(trace.Fingerprint());
  fingerprints["generator"] = Hex(trace.generator);

  auto fabric = MakeFabric(c.backend, c.transport, &dep, dep.server_ids());
  Ranker ranker(dep, *fabric, c.ranker);
  EquivalenceReport eq;

  std::vector<double> total, fanout, aggregation;
  std::vector<double> hit_series, budget_series;
  uint64_t lookups = 0, indices = 0, window_hits = 0, window_rows = 0;
  uint64_t evictions = 0, admissions = 0;
  uint64_t req_bytes = 0, resp_bytes = 0, payload = 0, subrequests = 0;
  LookupCounters counters;
  Tick first = -1, last = 0;
  std::map<std::string, uint64_t> levels;
  constexpr size_t kHitWindow = 8;
  size_t in_window = 0;

  ranker.ExecuteTrace(trace.batches, [&](const Batch& b, BatchOutcome&& out) {
    const BatchMetrics& m = out.metrics;
    for (size_t l = 0; l < b.size(); ++l) {
      const size_t want = b.lookups[l].total_indices();
      if (out.results[l].counters.total_rows() != want ||
          out.results[l].pooled.size() != b.lookups[l].features.size()) {
        Fail(ErrorCode::kInvariant,
             fmt::format("batch {} lookup {}: counters cover {} of {} indices", b.id, l,
                         out.results[l].counters.total_rows(), want));
      }
      indices += want;
    }
    if (c.verify) AccumulateEquivalence(dep, ranker.routing(), b, out, eq);
    lookups += b.size();
    counters += m.counters;
    total.push_back(static_cast<double>(m.latency));
    fanout.push_back(static_cast<double>(m.fanout_done - m.start));
    aggregation.push_back(static_cast<double>(m.end - m.fanout_done));
    if (first < 0) first = m.start;
    last = std::max(last, m.end);
    req_bytes += m.request_bytes;
    resp_bytes += m.response_bytes;
    payload += m.payload_bytes;
    subrequests += m.subrequests;
    evictions += m.evictions;
    admissions += m.admissions;
    ++levels[LoadLevelName(m.load)];
    window_hits += m.counters.cache_hits;
    window_rows += m.counters.total_rows();
    budget_series.push_back(static_cast<double>(m.next_cache_budget));
    if (++in_window == kHitWindow) {
      hit_series.push_back(window_rows ? double(window_hits) / double(window_rows) : 0.0);
      window_hits = window_rows = in_window = 0;
    }
  });
  if (in_window > 0) {
    hit_series.push_back(window_rows ? double(window_hits) / double(window_rows) : 0.0);
  }
  if (auto* v = dynamic_cast<VirtualFabric*>(fabric.get())) v->RunToQuiescence();
  const TransportStats s = fabric->Stats();
  if (s.completed != s.submitted) {
    Fail(ErrorCode::kInvariant, fmt::format("{} subrequests incomplete", s.submitted - s.completed));
  }

  const double duration = static_cast<double>(std::max<Tick>(1, last - first));
  const double throughput = static_cast<double>(lookups) * 1e9 / duration;
  std::vector<uint64_t> backlog_max;
  for (const auto& sample : s.engine_backlogs) {
    backlog_max.push_back(sample.empty() ? 0 : *std::max_element(sample.begin(), sample.end()));
  }
  const double hit_rate = indices ? double(counters.cache_hits) / double(indices) : 0.0;

  Part p;
  p.data = {
      {"batches", trace.batches.size()},
      {"lookups", lookups},
      {"indices", indices},
      {"subrequests", subrequests},
      {"duration_ns", last - first},
      {"throughput_lookups_per_s", throughput},
      {"latency_ns", {{"total", Distribution(total)},
                      {"fanout", Distribution(fanout)},
                      {"aggregation", Distribution(aggregation)}}},
      {"counters", {{"cache_hits", counters.cache_hits},
                    {"pushdown_groups", counters.pushdown_groups},
                    {"pushdown_rows", counters.pushdown_rows},
                    {"raw_rows", counters.raw_rows},
                    {"conservation", counters.total_rows() == indices}}},
      {"cache", {{"enabled", c.ranker.cache.enabled},
                 {"hit_rate", hit_rate},
                 {"hit_rate_series", hit_series},
                 {"hit_rate_window_batches", kHitWindow},
                 {"budget_series", Downsample(budget_series, 64)},
                 {"evictions", evictions},
                 {"admissions", admissions},
                 {"admission_fetches", ranker.admission_fetches()},
                 {"load_levels", levels}}},
      {"bytes", {{"request", req_bytes},
                 {"response", resp_bytes},
                 {"payload", payload},
                 {"total", req_bytes + resp_bytes},
                 {"payload_fraction",
                  req_bytes + resp_bytes ? double(payload) / double(req_bytes + resp_bytes) : 0.0}}},
      {"engine_backlog_max_series", Downsample(backlog_max, 64)},
      {"mean_engine_imbalance", s.mean_imbalance()},
      {"migrations", s.migrations},
      {"credit", {{"stall_events", s.credit_stall_events},
                  {"stall_time_ns", s.credit_stall_time},
                  {"messages", s.credit_messages},
                  {"fast_messages", s.fast_credit_messages},
                  {"mean_delivery_latency_ns", s.mean_credit_latency()}}},
      {"flow_control", FlowControl(s)},
  };
  if (c.verify) {
    p.data["equivalence"] = {{"lookups", eq.lookups},
                             {"features", eq.features},
                             {"max_rel_error", eq.max_rel_error},
                             {"max_abs_error", eq.max_abs_error},
                             {"passed", eq.passed()}};
  }
  p.headline = {{"throughput_lookups_per_s", throughput},
                {"latency_p99_ns", Percentile(total, 99)},
                {"cache_hit_rate", hit_rate},
                {"payload_bytes", payload}};

  p.text += Table("throughput", {"batches", "lookups", "duration_ns", "lookups/s"},
                  {{fmt::format("{}", trace.batches.size()), fmt::format("{}", lookups),
                    fmt::format("{}", last - first), F(throughput)}});
  std::vector<std::vector<std::string>> lat;
  for (const auto& [name, v] : {std::pair{"fanout", &fanout}, std::pair{"aggregation", &aggregation},
                                std::pair{"total", &total}}) {
    lat.push_back({name, F(Percentile(*v, 50)), F(Percentile(*v, 95)), F(Percentile(*v, 99))});
  }
  p.text += Table("latency per stage (ns)", {"stage", "p50", "p95", "p99"}, lat);
  p.text += Table("lookup counters", {"cache_hits", "pushdown_groups", "pushdown_rows", "raw_rows"},
                  {{fmt::format("{}", counters.cache_hits), fmt::format("{}", counters.pushdown_groups),
                    fmt::format("{}", counters.pushdown_rows), fmt::format("{}", counters.raw_rows)}});
  std::vector<std::vector<std::string>> hits;
  for (size_t i = 0; i < hit_series.size(); ++i) {
    hits.push_back({fmt::format("{}", i * kHitWindow), F(hit_series[i])});
  }
  p.text += Table("cache hit rate over time", {"from_batch", "hit_rate"}, hits);
  p.text += Table("bytes on wire", {"request", "response", "payload", "payload_fraction"},
                  {{fmt::format("{}", req_bytes), fmt::format("{}", resp_bytes),
                    fmt::format("{}", payload), F(p.data["bytes"]["payload_fraction"].get<double>())}});
  std::vector<std::vector<std::string>> q;
  const auto ds_times = Downsample(s.sample_times, 32);
  const auto ds_backlog = Downsample(backlog_max, 32);
  for (size_t i = 0; i < ds_backlog.size(); ++i) {
    q.push_back({fmt::format("{}", ds_times[i]), fmt::format("{}", ds_backlog[i])});
  }
  p.text += Table("engine queue depth over time", {"time_ns", "max_backlog"}, q);
  p.text += Table("transport", {"migrations", "credit_stalls", "stall_time_ns", "drops"},
                  {{fmt::format("{}", s.migrations), fmt::format("{}", s.credit_stall_events),
                    fmt::format("{}", s.credit_stall_time), fmt::format("{}", s.drops)}});
  if (c.verify) {
    p.text += Table("equivalence vs flat pooling", {"features", "max_rel_error", "passed"},
                    {{fmt::format("{}", eq.features), fmt::format("{:.3g}", eq.max_rel_error),
                      eq.passed() ? "yes" : "no"}});
  }
  return p;
}

// -------------------------------------------------------- fig5-contention

Part Fig5(const ExperimentConfig& c) {
  RequireVirtual(c);
  const CacheSettings& cs = c.ranker.cache;
  const MemoryModel& mm = cs.memory;
  if (mm.gpu_capacity_bytes <= 0) {
    Fail(ErrorCode::kConfig, "cache.gpu_capacity_bytes: fig5-contention needs a memory model");
  }
  // Sweep 0..80% of capacity.
  json sweep = json::array();
  std::vector<std::vector<std::string>> rows;
  bool monotone = true;
  uint64_t prev = UINT64_MAX;
  std::vector<double> xs, ys;
  for (int k = 0; k <= 8; ++k) {
    const auto bytes = static_cast<uint64_t>(mm.gpu_capacity_bytes * 0.1 * k);
    const uint64_t mb = mm.MaxBatchForCache(bytes);
    monotone = monotone && mb <= prev;
    prev = mb;
    xs.push_back(static_cast<double>(bytes) / (1024.0 * 1024.0));
    ys.push_back(static_cast<double>(mb));
    sweep.push_back({{"cache_fraction", 0.1 * k}, {"cache_bytes", bytes}, {"max_batch", mb}});
    rows.push_back({fmt::format("{:.0f}%", 10.0 * k), fmt::format("{}", bytes), fmt::format("{}", mb)});
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0;
  const uint64_t peak = mm.MaxBatchForCache(0);

  // Low load grows the cache, then a peak at the zero-cache maximum.
  WorkloadConfig w = c.ResolvedWorkload();
  w.amplitude = 0;
  w.indices_min = std::min<uint32_t>(w.indices_min, 4);
  w.indices_max = std::max(w.indices_min, std::min<uint32_t>(w.indices_max, 8));
  w.batch_interval = 0;
  w.lookups_per_batch = std::max<uint64_t>(1, static_cast<uint64_t>(cs.low_watermark / 2));
  w.duration_batches = cs.window + 4;
  Trace warm = GenerateTrace(w);
  w.lookups_per_batch = peak;
  w.seed = c.seed + 1;
  Trace hot = GenerateTrace(w);
  std::vector<Batch> batches = warm.batches;
  for (auto& b : hot.batches) {
    b.id += warm.batches.size();
    batches.push_back(std::move(b));
  }

  const Deployment dep = BuildDeployment(c);
  auto run = [&](bool adaptive, json& log) {
    RankerConfig rc = c.ranker;
    rc.cache.enabled = true;
    rc.cache.adaptive = adaptive;
    rc.cache.initial_bytes = cs.policy.max_cache_bytes;
    auto fabric = MakeFabric(Backend::kVirtualTime, c.transport, &dep, dep.server_ids());
    Ranker ranker(dep, *fabric, rc);
    uint64_t sustained = 0;
    json rejected = nullptr;
    for (const Batch& b : batches) {
      try {
        BatchOutcome out = ranker.ExecuteBatch(b);
        if (b.size() == peak) ++sustained;
        log.push_back({{"batch", b.id}, {"size", b.size()}, {"budget", out.metrics.cache_budget},
                       {"load", LoadLevelName(out.metrics.load)}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kCapacity) throw;
        rejected = {{"batch", b.id}, {"size", b.size()}, {"error", e.what()}};
        break;
      }
    }
    ranker.Flush();
    static_cast<VirtualFabric&>(*fabric).RunToQuiescence();
    return std::pair{sustained, rejected};
  };
  json adaptive_log = json::array(), fixed_log = json::array();
  const auto [adaptive_ok, adaptive_rej] = run(true, adaptive_log);
  const auto [fixed_ok, fixed_rej] = run(false, fixed_log);
  const uint64_t peak_batches = hot.batches.size();

  Part p;
  p.data = {{"sweep", sweep},
            {"monotone_nonincreasing", monotone},
            {"slope_batches_per_mib", slope},
            {"zero_cache_max_batch", peak},
            {"peak_batches", peak_batches},
            {"adaptive", {{"sustained_batches", adaptive_ok},
                          {"rejected", adaptive_rej},
                          {"batches", adaptive_log}}},
            {"fixed", {{"sustained_batches", fixed_ok},
                       {"rejected", fixed_rej},
                       {"batches", fixed_log}}}};
  p.headline = {{"monotone_nonincreasing", monotone},
                {"slope_batches_per_mib", slope},
                {"zero_cache_max_batch", peak},
                {"adaptive_sustained", adaptive_ok == peak_batches},
                {"fixed_rejected", !fixed_rej.is_null()}};
  p.text += Table("max batch vs cache size", {"cache", "cache_bytes", "max_batch"}, rows);
  p.text += Table("peak load at the zero-cache maximum batch",
                  {"cache", "peak_batches_served", "rejected"},
                  {{"adaptive", fmt::format("{}/{}", adaptive_ok, peak_batches),
                    adaptive_rej.is_null() ? "no" : "yes"},
                   {"fixed", fmt::format("{}/{}", fixed_ok, peak_batches),
                    fixed_rej.is_null() ? "no" : "yes"}});
  p.text += fmt::format("trend slope: {:.4g} batches per MiB of cache\n\n", slope);
  return p;
}

// ------------------------------------------------------ synthetic traffic

struct SyntheticRun {
  TransportStats stats;
  double throughput = 0;  // completions per second
};

// Submits `n` synthetic subrequests. `pick` chooses the peer of message i;
// a zero interval submits them all at once.
SyntheticRun RunSynthetic(const TransportParams& params, const std::vector<ServerId>& peers,
                          uint64_t n, Tick interval, const std::function<ServerId(uint64_t)>& pick) {
  VirtualFabric f(params, nullptr, peers);
  for (uint64_t i = 0; i < n; ++i) {
    if (interval > 0) f.AdvanceTo(static_cast<Tick>(i) * interval);
    Subrequest r;
    r.tag = i;
    r.peer = pick(i);
    f.Submit(std::move(r));
  }
  f.RunToQuiescence();
  SyntheticRun out;
  out.stats = f.stats();
  const double span = static_cast<double>(
      std::max<Tick>(1, out.stats.last_completion - out.stats.first_submit));
  out.throughput = static_cast<double>(out.stats.completed) * 1e9 / span;
  return out;
}

Part Fig6Left(const ExperimentConfig& c) {
  RequireVirtual(c);
  constexpr uint64_t kMessages = 100000;
  const auto peers = SyntheticPeers(c);
  auto rr = [&](uint64_t i) { return peers[i % peers.size()]; };
  TransportParams naive = c.transport;
  naive.assignment = AssignmentPolicy::kNaive;
  TransportParams aware = c.transport;
  aware.assignment = AssignmentPolicy::kMappingAware;
  const SyntheticRun a = RunSynthetic(naive, peers, kMessages, 0, rr);
  const SyntheticRun b = RunSynthetic(aware, peers, kMessages, 0, rr);
  const double ratio = b.throughput / a.throughput;

  auto side = [](const SyntheticRun& r) {
    return json{{"throughput_msgs_per_s", r.throughput},
                {"duration_ns", r.stats.last_completion - r.stats.first_submit},
                {"shared_unit_posts", r.stats.shared_unit_posts},
                {"flow_control", FlowControl(r.stats)}};
  };
  Part p;
  p.data = {{"messages", kMessages}, {"naive", side(a)}, {"mapping_aware", side(b)},
            {"throughput_ratio", ratio}, {"naive_over_aware", a.throughput / b.throughput}};
  p.headline = {{"throughput_naive", a.throughput},
                {"throughput_mapping_aware", b.throughput},
                {"throughput_ratio", ratio},
                {"naive_over_aware", a.throughput / b.throughput}};
  p.text += Table("throughput (messages/s)", {"assignment", "throughput", "shared_unit_posts"},
                  {{"naive", F(a.throughput), fmt::format("{}", a.stats.shared_unit_posts)},
                   {"mapping-aware", F(b.throughput), fmt::format("{}", b.stats.shared_unit_posts)}});
  p.text += fmt::format("throughput ratio (mapping-aware / naive): {:.4g}\n\n", ratio);
  return p;
}

Part Fig6Right(const ExperimentConfig& c) {
  RequireVirtual(c);
  constexpr uint64_t kMessages = 50000;
  const auto peers = SyntheticPeers(c);
  auto rr = [&](uint64_t i) { return peers[i % peers.size()]; };
  TransportParams fast = c.transport;
  fast.credit_mode = CreditMode::kFastChannel;
  TransportParams piggy = c.transport;
  piggy.credit_mode = CreditMode::kPiggybackOnly;

  // Offer 1.25x the measured capacity so the data path stays saturated.
  const SyntheticRun cap = RunSynthetic(piggy, peers, kMessages / 5, 0, rr);
  const Tick interval = std::max<Tick>(1, static_cast<Tick>(std::floor(1e9 / (1.25 * cap.throughput))));
  const SyntheticRun a = RunSynthetic(piggy, peers, kMessages, interval, rr);
  const SyntheticRun b = RunSynthetic(fast, peers, kMessages, interval, rr);
  const double quotient = b.stats.mean_credit_latency() / a.stats.mean_credit_latency();

  auto side = [](const SyntheticRun& r) {
    return json{{"mean_credit_latency_ns", r.stats.mean_credit_latency()},
                {"credits_delivered", r.stats.credits_delivered},
                {"credit_messages", r.stats.credit_messages},
                {"fast_credit_messages", r.stats.fast_credit_messages},
                {"piggybacked_credits", r.stats.piggybacked_credits},
                {"stall_events", r.stats.credit_stall_events},
                {"stall_time_ns", r.stats.credit_stall_time},
                {"throughput_msgs_per_s", r.throughput},
                {"flow_control", FlowControl(r.stats)}};
  };
  Part p;
  p.data = {{"messages", kMessages},
            {"capacity_msgs_per_s", cap.throughput},
            {"arrival_interval_ns", interval},
            {"piggyback_only", side(a)},
            {"fast_channel", side(b)},
            {"latency_quotient", quotient}};
  p.headline = {{"credit_latency_piggyback_ns", a.stats.mean_credit_latency()},
                {"credit_latency_fast_ns", b.stats.mean_credit_latency()},
                {"latency_quotient", quotient}};
  p.text += Table("credit delivery under saturation",
                  {"mode", "mean_latency_ns", "credit_msgs", "stalls", "stall_time_ns"},
                  {{"piggyback-only", F(a.stats.mean_credit_latency()),
                    fmt::format("{}", a.stats.credit_messages),
                    fmt::format("{}", a.stats.credit_stall_events),
                    fmt::format("{}", a.stats.credit_stall_time)},
                   {"fast-channel", F(b.stats.mean_credit_latency()),
                    fmt::format("{}", b.stats.credit_messages),
                    fmt::format("{}", b.stats.credit_stall_events),
                    fmt::format("{}", b.stats.credit_stall_time)}});
  p.text += fmt::format("latency quotient (fast / piggyback): {:.4g}\n\n", quotient);
  return p;
}

// ----------------------------------------------------------- pooling-bytes

Part PoolingBytes(const ExperimentConfig& c) {
  RequireVirtual(c);
  constexpr uint32_t kRows = 8;
  constexpr uint64_t kLookups = 512;
  constexpr uint64_t kPerBatch = 64;
  const Deployment dep = BuildDeployment(c);
  const TableMeta& table = c.store.tables.front();
  std::vector<ShardDesc> shards;
  for (const auto& s : dep.placement()) {
    if (s.table == table.id && s.end - s.start >= kRows) shards.push_back(s);
  }
  if (shards.empty()) {
    Fail(ErrorCode::kConfig, fmt::format("store.tables[0]: needs a shard of at least {} rows", kRows));
  }
  // Every lookup: one feature, 8 consecutive rows inside one shard.
  std::mt19937_64 rng(c.seed);
  std::vector<Batch> batches;
  for (uint64_t i = 0; i < kLookups; ++i) {
    if (i % kPerBatch == 0) {
      batches.emplace_back();
      batches.back().id = batches.size() - 1;
    }
    const ShardDesc& s = shards[rng() % shards.size()];
    const RowIndex start = s.start + rng() % (s.end - s.start - kRows + 1);
    Feature f{table.id, PoolingOp::kSum, {}};
    for (uint32_t k = 0; k < kRows; ++k) f.indices.push_back(start + k);
    batches.back().lookups.push_back(LookupRequest{{std::move(f)}});
  }

  struct Totals {
    uint64_t request = 0, response = 0, payload = 0, subrequests = 0;
    std::vector<BatchOutcome> outcomes;
  };
  auto run = [&](uint32_t threshold) {
    RankerConfig rc = c.ranker;
    rc.pushdown_threshold = threshold;
    rc.cache.enabled = false;
    rc.cache.memory = MemoryModel{};
    auto fabric = MakeFabric(Backend::kVirtualTime, c.transport, &dep, dep.server_ids());
    Ranker ranker(dep, *fabric, rc);
    Totals t;
    ranker.ExecuteTrace(batches, [&](const Batch&, BatchOutcome&& out) {
      t.request += out.metrics.request_bytes;
      t.response += out.metrics.response_bytes;
      t.payload += out.metrics.payload_bytes;
      t.subrequests += out.metrics.subrequests;
      t.outcomes.push_back(std::move(out));
    });
    static_cast<VirtualFabric&>(*fabric).RunToQuiescence();
    return t;
  };
  const Totals push = run(2);
  const Totals raw = run(kNoPushdown);

  // Exact prediction from the message-size model.
  const MessageSizeModel& sz = c.transport.sizes;
  const uint64_t dim = table.dim;
  const uint64_t req = sz.header_bytes + sz.slice_header_bytes + uint64_t{kRows} * sz.index_bytes;
  const uint64_t push_payload = dim * kElementWidth;
  const uint64_t raw_payload = kRows * dim * kElementWidth;
  const uint64_t push_resp = sz.header_bytes + sz.slice_header_bytes + push_payload + sz.count_bytes;
  const uint64_t raw_resp = sz.header_bytes + sz.slice_header_bytes + raw_payload;
  const bool exact = push.payload == kLookups * push_payload && raw.payload == kLookups * raw_payload &&
                     push.response == kLookups * push_resp && raw.response == kLookups * raw_resp &&
                     push.request == kLookups * req && raw.request == kLookups * req;
  double max_diff = 0;
  for (size_t b = 0; b < push.outcomes.size(); ++b) {
    for (size_t l = 0; l < push.outcomes[b].results.size(); ++l) {
      const Embedding& x = push.outcomes[b].results[l].pooled[0];
      const Embedding& y = raw.outcomes[b].results[l].pooled[0];
      for (size_t j = 0; j < x.size(); ++j) {
        max_diff = std::max(max_diff, double(std::fabs(x[j] - y[j])));
      }
    }
  }
  const double ratio = double(push.payload) / double(raw.payload);
  auto side = [](const Totals& t) {
    return json{{"request_bytes", t.request}, {"response_bytes", t.response},
                {"payload_bytes", t.payload}, {"subrequests", t.subrequests}};
  };
  Part p;
  p.data = {{"lookups", kLookups},
            {"rows_per_lookup", kRows},
            {"dim", dim},
            {"pushdown", side(push)},
            {"raw_fetch", side(raw)},
            {"payload_ratio", ratio},
            {"predicted", {{"request_bytes_per_lookup", req},
                           {"pushdown_response_bytes_per_lookup", push_resp},
                           {"raw_response_bytes_per_lookup", raw_resp},
                           {"pushdown_payload_bytes_per_lookup", push_payload},
                           {"raw_payload_bytes_per_lookup", raw_payload}}},
            {"model_exact", exact},
            {"max_result_difference", max_diff}};
  p.headline = {{"payload_ratio", ratio}, {"model_exact", exact},
                {"max_result_difference", max_diff}};
  p.text += Table("bytes on wire, 8 co-located rows per lookup",
                  {"mode", "request", "response", "payload", "subrequests"},
                  {{"pushdown", fmt::format("{}", push.request), fmt::format("{}", push.response),
                    fmt::format("{}", push.payload), fmt::format("{}", push.subrequests)},
                   {"raw-fetch", fmt::format("{}", raw.request), fmt::format("{}", raw.response),
                    fmt::format("{}", raw.payload), fmt::format("{}", raw.subrequests)}});
  p.text += fmt::format("payload ratio (pushdown / raw): {:.6g}; size model exact: {}\n\n", ratio,
                        exact ? "yes" : "no");
  return p;
}

// -------------------------------------------------------- migration-balance

Part MigrationBalance(const ExperimentConfig& c) {
  RequireVirtual(c);
  constexpr uint64_t kMessages = 40000;
  constexpr Tick kInterval = 12;
  const auto peers = SyntheticPeers(c);
  if (peers.size() < 2) {
    Fail(ErrorCode::kConfig, "store.num_servers: migration-balance needs at least 2 servers");
  }
  // 90% of the traffic to server 0, the rest spread over the others.
  std::vector<ServerId> pick(kMessages);
  std::mt19937_64 rng(c.seed);
  for (auto& s : pick) {
    s = (rng() % 10) < 9 ? peers[0] : peers[1 + rng() % (peers.size() - 1)];
  }
  auto chooser = [&](uint64_t i) { return pick[i]; };
  TransportParams off = c.transport;
  off.rebalance = false;
  TransportParams on = c.transport;
  on.rebalance = true;
  const SyntheticRun a = RunSynthetic(off, peers, kMessages, kInterval, chooser);
  const SyntheticRun b = RunSynthetic(on, peers, kMessages, kInterval, chooser);
  const double ia = a.stats.mean_imbalance();
  const double ib = b.stats.mean_imbalance();

  auto side = [](const SyntheticRun& r) {
    return json{{"mean_imbalance", r.stats.mean_imbalance()},
                {"samples", r.stats.sample_times.size()},
                {"migrations", r.stats.migrations},
                {"migration_buffered", r.stats.migration_buffered},
                {"fifo_checks", r.stats.fifo_checks},
                {"throughput_msgs_per_s", r.throughput},
                {"flow_control", FlowControl(r.stats)}};
  };
  Part p;
  p.data = {{"messages", kMessages},
            {"skew", 0.9},
            {"no_migration", side(a)},
            {"rebalance", side(b)},
            {"imbalance_ratio", ia > 0 ? ib / ia : 0.0}};
  p.headline = {{"imbalance_off", ia},
                {"imbalance_on", ib},
                {"imbalance_ratio", ia > 0 ? ib / ia : 0.0},
                {"migrations", b.stats.migrations},
                {"fifo_violations", 0}};
  p.text += Table("engine backlog imbalance (time-averaged max - min)",
                  {"run", "mean_imbalance", "migrations", "fifo_checks", "msgs/s"},
                  {{"no-migration", F(ia), fmt::format("{}", a.stats.migrations),
                    fmt::format("{}", a.stats.fifo_checks), F(a.throughput)},
                   {"rebalance", F(ib), fmt::format("{}", b.stats.migrations),
                    fmt::format("{}", b.stats.fifo_checks), F(b.throughput)}});
  return p;
}

}  // namespace

MetricsReport RunExperiment(const ExperimentConfig& config) {
  if (!IsKnownExperiment(config.experiment)) {
    Fail(ErrorCode::kConfig, fmt::format("experiment.kind: unknown experiment \"{}\"",
                                         config.experiment));
  }
  config.Validate();
  json fingerprints = {{"config", Hex(config.Fingerprint())}};
  Part p;
  const std::string& e = config.experiment;
  if (e == "replay") p = Replay(config, fingerprints);
  else if (e == "fig5-contention") p = Fig5(config);
  else if (e == "fig6-left-throughput") p = Fig6Left(config);
  else if (e == "fig6-right-credit") p = Fig6Right(config);
  else if (e == "pooling-bytes") p = PoolingBytes(config);
  else p = MigrationBalance(config);

  MetricsReport r;
  r.experiment = e;
  r.summary = {{"format", "embserve-summary v1"},
               {"experiment", e},
               {"name", config.name},
               {"backend", BackendName(config.backend)},
               {"wall_clock", config.backend == Backend::kThreaded},
               {"seed", config.seed},
               {"fingerprints", fingerprints},
               {"headline", p.headline},
               {"results", p.data},
               {"config", ConfigToYaml(config)}};
  r.text = fmt::format("embserve report: {} ({})\nexperiment: {}\nbackend: {}{}\nconfig fingerprint: "
                       "{}\n\n",
                       config.name, e, e, BackendName(config.backend),
                       config.backend == Backend::kThreaded ? " (wall-clock, not gated)" : "",
                       fingerprints["config"].get<std::string>());
  r.text += p.text;
  r.text += "== resolved config ==\n" + ConfigToYaml(config);
  return r;
}

void WriteReport(const MetricsReport& report, const std::string& prefix) {
  const auto dir = std::filesystem::path(prefix).parent_path();
  std::error_code ec;
  if (!dir.empty()) std::filesystem::create_directories(dir, ec);
  for (const auto& [ext, body] : {std::pair{".txt", report.text},
                                  std::pair{".json", report.SummaryText()}}) {
    const std::string path = prefix + ext;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << body) || !out.flush()) {
      Fail(ErrorCode::kIo, fmt::format("cannot write report {}", path));
    }
  }
}

std::string CompareSummaries(const std::vector<std::pair<std::string, json>>& runs) {
  std::set<std::string> keys;
  for (const auto& [name, s] : runs) {
    if (!s.is_object() || !s.contains("headline")) {
      Fail(ErrorCode::kParse, fmt::format("{}: not an embserve summary", name));
    }
    for (const auto& [k, v] : s["headline"].items()) keys.insert(k);
  }
  std::vector<std::string> header = {"metric"};
  for (const auto& [name, s] : runs) {
    header.push_back(fmt::format("{} [{}]", name, s.value("experiment", std::string("?"))));
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& k : keys) {
    std::vector<std::string> row = {k};
    for (const auto& [name, s] : runs) {
      const json& h = s["headline"];
      if (!h.contains(k)) {
        row.push_back("-");
      } else if (h[k].is_number_float()) {
        row.push_back(F(h[k].get<double>()));
      } else {
        row.push_back(h[k].dump());
      }
    }
    rows.push_back(std::move(row));
  }
  return Table("comparison", header, rows);
}

}  // namespace embserve
