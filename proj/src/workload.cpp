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

#include "workload.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "error.hpp"
#include "hash.hpp"

namespace embserve {

ZipfSampler::ZipfSampler(uint64_t n, double alpha) : alpha_(alpha) {
  if (n == 0) Fail(ErrorCode::kConfig, "zipf: need at least one row");
  if (!(alpha >= 0)) Fail(ErrorCode::kConfig, "zipf: alpha must be >= 0");
  cdf_.resize(n);
  double sum = 0;
  for (uint64_t k = 0; k < n; ++k) {
    sum += std::pow(static_cast<double>(k + 1), -alpha);
    cdf_[k] = sum;
  }
  for (double& c : cdf_) c /= sum;
  cdf_.back() = 1.0;
}

uint64_t ZipfSampler::Sample(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<uint64_t>(it - cdf_.begin());
}

double ZipfSampler::Pmf(uint64_t k) const {
  return k == 0 ? cdf_.at(0) : cdf_.at(k) - cdf_.at(k - 1);
}

void WorkloadConfig::Validate() const {
  auto need = [](bool ok, const std::string& field, const char* what) {
    if (!ok) Fail(ErrorCode::kConfig, fmt::format("workload.{}: {}", field, what));
  };
  need(!tables.empty(), "tables", "at least one table is required");
  std::set<TableId> seen;
  for (size_t i = 0; i < tables.size(); ++i) {
    const std::string f = fmt::format("tables[{}]", i);
    need(seen.insert(tables[i].table).second, f + ".table", "duplicate table");
    need(tables[i].rows >= 1, f + ".rows", "must be >= 1");
    need(tables[i].zipf_alpha >= 0, f + ".zipf_alpha", "must be >= 0");
    if (!with_replacement) {
      need(indices_max <= tables[i].rows, f + ".rows",
           "fewer rows than indices_max with replacement disabled");
    }
  }
  need(indices_min >= 1, "indices_min", "must be >= 1");
  need(indices_max >= indices_min, "indices_max", "must be >= indices_min");
  need(lookups_per_batch >= 1, "lookups_per_batch", "must be >= 1");
  need(amplitude >= 0 && amplitude < 1, "amplitude", "must be in [0, 1)");
  need(period >= 1, "period", "must be >= 1");
  need(duration_batches >= 1, "duration_batches", "must be >= 1");
  need(batch_interval >= 0, "batch_interval", "must be >= 0");
  need(locality_prob >= 0 && locality_prob <= 1, "locality_prob", "must be in [0, 1]");
  need(cooccurrence_prob >= 0 && cooccurrence_prob <= 1, "cooccurrence_prob",
       "must be in [0, 1]");
}

uint64_t WorkloadConfig::Fingerprint() const {
  Fnv1a64 h;
  auto d = [&](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h.Update(bits);
  };
  h.Update(std::string_view("workload-v1"));
  for (const auto& t : tables) {
    h.Update(uint64_t{t.table.value});
    h.Update(t.rows);
    d(t.zipf_alpha);
    h.Update(uint64_t{t.op == PoolingOp::kMean});
  }
  h.Update(uint64_t{indices_min});
  h.Update(uint64_t{indices_max});
  h.Update(uint64_t{with_replacement});
  h.Update(lookups_per_batch);
  d(amplitude);
  h.Update(period);
  h.Update(duration_batches);
  h.Update(static_cast<uint64_t>(batch_interval));
  h.Update(seed);
  d(locality_prob);
  h.Update(uint64_t{cooccurrence_group});
  d(cooccurrence_prob);
  return h.digest();
}

uint64_t BatchSizeAt(const WorkloadConfig& c, uint64_t batch) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(batch % c.period) /
                       static_cast<double>(c.period);
  const double size = std::round(static_cast<double>(c.lookups_per_batch) *
                                 (1.0 + c.amplitude * std::sin(phase)));
  return std::max<uint64_t>(1, static_cast<uint64_t>(size));
}

namespace {

double Uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Trace GenerateTrace(const WorkloadConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  std::vector<ZipfSampler> samplers;
  samplers.reserve(config.tables.size());
  for (const auto& t : config.tables) samplers.emplace_back(t.rows, t.zipf_alpha);

  Trace trace;
  trace.generator = config.Fingerprint();
  trace.batches.reserve(config.duration_batches);
  const uint32_t span = config.indices_max - config.indices_min + 1;
  for (uint64_t b = 0; b < config.duration_batches; ++b) {
    Batch batch;
    batch.id = b;
    batch.arrival = static_cast<Tick>(b) * config.batch_interval;
    const uint64_t n = BatchSizeAt(config, b);
    batch.lookups.resize(n);
    for (auto& lookup : batch.lookups) {
      for (size_t t = 0; t < config.tables.size(); ++t) {
        const WorkloadTable& wt = config.tables[t];
        const ZipfSampler& z = samplers[t];
        Feature f;
        f.table = wt.table;
        f.op = wt.op;
        const uint32_t count = config.indices_min + static_cast<uint32_t>(rng() % span);
        std::set<RowIndex> used;
        auto push = [&](RowIndex r) {
          if (!config.with_replacement && !used.insert(r).second) return false;
          f.indices.push_back(r);
          return true;
        };
        if (config.cooccurrence_group > 0 && Uniform(rng) < config.cooccurrence_prob) {
          const uint64_t head = z.Sample(Uniform(rng));
          const uint64_t stride = std::max<uint64_t>(1, wt.rows / config.cooccurrence_group);
          for (uint32_t j = 0; j < config.cooccurrence_group && f.indices.size() < count; ++j) {
            push((head + j * stride) % wt.rows);
          }
        }
        if (f.indices.size() < count && Uniform(rng) < config.locality_prob) {
          RowIndex r = z.Sample(Uniform(rng));
          r = std::min(r, wt.rows - std::min<uint64_t>(wt.rows, count - f.indices.size()));
          while (f.indices.size() < count && r < wt.rows) push(r++);
        }
        while (f.indices.size() < count) {
          if (push(z.Sample(Uniform(rng)))) continue;
          // Rejected duplicate: fall back to the next unused row after a
          // fresh draw so the loop always terminates.
          RowIndex r = z.Sample(Uniform(rng));
          while (used.count(r)) r = (r + 1) % wt.rows;
          push(r);
        }
        lookup.features.push_back(std::move(f));
      }
    }
    trace.batches.push_back(std::move(batch));
  }
  return trace;
}

uint64_t Trace::Fingerprint() const {
  Fnv1a64 h;
  h.Update(std::string_view("trace-v1"));
  h.Update(uint64_t{batches.size()});
  for (const auto& b : batches) {
    h.Update(b.id);
    h.Update(static_cast<uint64_t>(b.arrival));
    h.Update(uint64_t{b.lookups.size()});
    for (const auto& l : b.lookups) {
      h.Update(uint64_t{l.features.size()});
      for (const auto& f : l.features) {
        h.Update(uint64_t{f.table.value});
        h.Update(uint64_t{f.op == PoolingOp::kMean});
        h.Update(uint64_t{f.indices.size()});
        for (RowIndex r : f.indices) h.Update(r);
      }
    }
  }
  return h.digest();
}

std::string FormatTrace(const Trace& trace) {
  std::string out = fmt::format("embserve-trace v1 generator={:016x} fingerprint={:016x} "
                                "batches={}\n",
                                trace.generator, trace.Fingerprint(), trace.batches.size());
  for (const auto& b : trace.batches) {
    out += fmt::format("{}\t{}", b.id, b.arrival);
    for (const auto& l : b.lookups) {
      out += '\t';
      for (size_t f = 0; f < l.features.size(); ++f) {
        const Feature& feat = l.features[f];
        if (f > 0) out += ';';
        out += fmt::format("{}:{}:", feat.table.value, PoolingOpName(feat.op));
        for (size_t i = 0; i < feat.indices.size(); ++i) {
          if (i > 0) out += ',';
          out += fmt::format("{}", feat.indices[i]);
        }
      }
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  for (;;) {
    const size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) return out;
    pos = next + 1;
  }
}

class LineParser {
 public:
  explicit LineParser(size_t line) : line_(line) {}

  [[noreturn]] void Error(std::string_view field, std::string_view what) const {
    Fail(ErrorCode::kParse, fmt::format("trace line {}, field {}: {}", line_, field, what));
  }

  template <typename T>
  T Number(std::string_view text, std::string_view field) const {
    T v{};
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || p != end) {
      Error(field, fmt::format("expected an integer, got \"{}\"", text));
    }
    return v;
  }

  uint64_t Hex(std::string_view text, std::string_view field) const {
    uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v, 16);
    if (text.empty() || ec != std::errc() || p != end) {
      Error(field, fmt::format("expected hex digits, got \"{}\"", text));
    }
    return v;
  }

 private:
  size_t line_;
};

std::string_view KeyValue(const LineParser& p, std::string_view token, std::string_view key) {
  if (token.substr(0, key.size() + 1) != fmt::format("{}=", key)) {
    p.Error(key, fmt::format("expected {}=..., got \"{}\"", key, token));
  }
  return token.substr(key.size() + 1);
}

}  // namespace

Trace ParseTrace(const std::string& text) {
  std::vector<std::string_view> lines = Split(text, '\n');
  const bool terminated = !text.empty() && text.back() == '\n';
  if (terminated) lines.pop_back();
  if (lines.empty() || (lines.size() == 1 && lines[0].empty())) {
    Fail(ErrorCode::kParse, "trace line 1, field header: empty file");
  }

  const LineParser hp(1);
  const auto header = Split(lines[0], ' ');
  if (header.size() != 5 || header[0] != "embserve-trace") {
    hp.Error("header", "expected \"embserve-trace v1 generator=.. fingerprint=.. batches=..\"");
  }
  if (header[1] != "v1") hp.Error("version", fmt::format("unsupported version \"{}\"", header[1]));
  Trace trace;
  trace.generator = hp.Hex(KeyValue(hp, header[2], "generator"), "generator");
  // Hand-written files may say fingerprint=none to skip the content check.
  const std::string_view fp_text = KeyValue(hp, header[3], "fingerprint");
  const bool check = fp_text != "none";
  const uint64_t fingerprint = check ? hp.Hex(fp_text, "fingerprint") : 0;
  const auto count = hp.Number<uint64_t>(KeyValue(hp, header[4], "batches"), "batches");

  for (size_t i = 1; i < lines.size(); ++i) {
    const size_t line_no = i + 1;
    const LineParser p(line_no);
    if (i == lines.size() - 1 && !terminated) {
      p.Error("line", "truncated: missing end of line");
    }
    const auto fields = Split(lines[i], '\t');
    if (fields.size() < 3) p.Error("batch", "expected id, tick and at least one lookup");
    Batch b;
    b.id = p.Number<uint64_t>(fields[0], "id");
    b.arrival = p.Number<Tick>(fields[1], "tick");
    for (size_t l = 2; l < fields.size(); ++l) {
      const std::string lname = fmt::format("lookup {}", l - 2);
      LookupRequest lookup;
      for (std::string_view feat : Split(fields[l], ';')) {
        const std::string fname = fmt::format("{} feature {}", lname, lookup.features.size());
        const auto parts = Split(feat, ':');
        if (parts.size() != 3) p.Error(fname, "expected table:op:indices");
        Feature f;
        f.table = TableId(p.Number<uint32_t>(parts[0], fname + " table"));
        const auto op = ParsePoolingOp(parts[1]);
        if (!op) p.Error(fname + " op", fmt::format("unknown pooling op \"{}\"", parts[1]));
        f.op = *op;
        for (std::string_view idx : Split(parts[2], ',')) {
          f.indices.push_back(p.Number<RowIndex>(idx, fname + " index"));
        }
        lookup.features.push_back(std::move(f));
      }
      b.lookups.push_back(std::move(lookup));
    }
    trace.batches.push_back(std::move(b));
  }
  if (trace.batches.size() != count) {
    const LineParser p(lines.size() + 1);
    p.Error("line", fmt::format("truncated: header promises {} batches, found {}", count,
                                trace.batches.size()));
  }
  if (check && trace.Fingerprint() != fingerprint) {
    hp.Error("fingerprint", fmt::format("content hash {:016x} does not match header {:016x}",
                                        trace.Fingerprint(), fingerprint));
  }
  return trace;
}

void SaveTrace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, fmt::format("cannot write trace {}", path));
  out << FormatTrace(trace);
  if (!out.flush()) Fail(ErrorCode::kIo, fmt::format("failed writing trace {}", path));
}

Trace LoadTrace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read trace {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ParseTrace(ss.str());
  } catch (const Error& e) {
    Fail(e.code(), fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace embserve
