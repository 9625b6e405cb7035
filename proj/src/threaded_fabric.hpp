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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "fabric.hpp"

namespace embserve {

// Real threads: one per engine, a mutex per parallelism unit and a pool of
// server workers. Service times are spun in wall-clock nanoseconds. Credits
// come back when the ranker collects completions. No migration and no
// separate credit channel.
class ThreadedFabric final : public Fabric {
 public:
  ThreadedFabric(const TransportParams& params, const Deployment* deployment,
                 std::vector<ServerId> peers);
  ~ThreadedFabric() override;
  ThreadedFabric(const ThreadedFabric&) = delete;
  ThreadedFabric& operator=(const ThreadedFabric&) = delete;

  void Submit(Subrequest request) override;
  std::vector<Completion> WaitCompletions() override;
  void AdvanceTo(Tick) override {}
  Tick Now() const override;
  uint64_t Outstanding() const override;
  TransportStats Stats() const override;
  const Topology& topology() const override { return topology_; }
  Backend backend() const override { return Backend::kThreaded; }

 private:
  struct Job {
    ConnId conn;
    uint64_t seq = 0;
    Subrequest req;
    SubrequestBytes bytes;
    Tick submitted = 0;
    Tick posted = 0;
  };
  struct Engine {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Job> queue;
  };
  struct Conn {
    ConnectionSpec spec;
    EngineId engine;
    uint64_t next_seq = 0;
    uint64_t next_post = 0;
    uint32_t available = 0;  // guarded by mu_
  };

  void EngineLoop(EngineId engine);
  void ServerLoop();
  void Spin(Tick ns) const;
  void CheckFailure();

  TransportParams params_;
  const Deployment* deployment_;
  Topology topology_;
  std::vector<Conn> conns_;
  std::vector<uint32_t> engines_per_unit_;
  std::map<ServerId, std::vector<ConnId>> peer_conns_;
  std::map<ServerId, size_t> peer_cursor_;
  std::vector<std::unique_ptr<Engine>> engines_;
  std::vector<std::unique_ptr<std::mutex>> units_;
  std::chrono::steady_clock::time_point start_;

  mutable std::mutex mu_;
  std::condition_variable server_cv_;
  std::condition_variable done_cv_;
  std::deque<Job> posted_;
  std::vector<Completion> ready_;
  std::vector<ConnId> to_release_;
  TransportStats stats_;
  std::exception_ptr failure_;
  bool stop_ = false;

  std::vector<std::thread> threads_;
};

}  // namespace embserve
