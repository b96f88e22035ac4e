/* Copyright 2026 The slidesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "slidesim/desim/graph.hpp"
#include "slidesim/workload.hpp"

namespace slidesim::testing {

// Small seeded generator; every property test draws from one of these so
// failures reproduce from the printed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 eng_;
};

/// A valid configuration small enough to simulate in milliseconds.
inline ExperimentConfig random_config(Rng& r, bool allow_nvme = true) {
  ExperimentConfig c;
  auto& m = c.model;
  m.num_layers = r.uniform_int(1, 12);
  m.hidden_size = 128 * r.uniform_int(4, 48);
  m.params_per_layer = static_cast<std::uint64_t>(r.log_uniform(1e6, 6e8));
  m.vocab_size = r.uniform_int(1000, 160000);
  if (r.coin(0.4)) {
    m.embedding_params = static_cast<std::uint64_t>(m.vocab_size) * static_cast<std::uint64_t>(m.hidden_size);
    m.head_params = m.embedding_params;
    m.tied_embeddings = r.coin(0.3);
  }
  c.workload.batch_size = r.uniform_int(1, 64);
  c.workload.seq_len = r.pick(std::vector<std::int64_t>{128, 512, 1024, 2048});

  auto& h = c.hardware;
  h.gpu_flops = r.log_uniform(2e13, 1e15);
  h.gpu_efficiency = r.uniform(0.2, 1.0);
  h.pcie_h2d_bw = static_cast<Bytes>(r.log_uniform(4e9, 6.4e10));
  h.pcie_d2h_bw = static_cast<Bytes>(r.log_uniform(4e9, 6.4e10));
  h.cpu_update_rate = r.log_uniform(2e8, 8e9);
  h.cpu_convert_rate = r.log_uniform(5e8, 2e10);
  h.ram_bytes = 1ULL << 42;
  h.vram_bytes = 1ULL << 40;

  auto& p = c.policy;
  p.window_units = r.uniform_int(2, 5);
  p.grad_buffer_depth = r.uniform_int(1, 3);
  p.convert_buffer_depth = r.uniform_int(1, 3);
  p.optimizer_staging_depth = r.uniform_int(1, 3);
  p.lce_chunk_rows = std::min<std::int64_t>(1024, c.workload.tokens());
  p.activation_target = r.pick(std::vector<ActivationTarget>{
      ActivationTarget::kGpuResident, ActivationTarget::kCpu, ActivationTarget::kNvme});
  if (allow_nvme && r.coin(0.5)) {
    h.nvme_drives = r.uniform_int(1, 4);
    h.nvme_read_bw = static_cast<Bytes>(r.log_uniform(1e9, 1.4e10));
    h.nvme_write_bw = static_cast<Bytes>(r.log_uniform(1e9, 1.2e10));
    h.gds_enabled = r.coin();
    p.optimizer_offload_fraction = r.pick(std::vector<double>{0.0, 0.5, 1.0});
    p.master_params_on_nvme = r.coin(0.25);
  }
  if (h.nvme_drives == 0 && p.activation_target == ActivationTarget::kNvme) {
    p.activation_target = ActivationTarget::kCpu;
  }
  return c;
}

struct RandomGraphOptions {
  int max_tasks = 12;
  // When false, tasks of the same priority class never contend: they share
  // no non-FIFO resource and take no tokens.
  bool allow_class_contention = false;
};

/// Random DAG over a few unit resources (two of them FIFO) and two pools.
/// Each task that acquires a token is paired with a later task (or itself)
/// that releases it, so pools balance. A releaser always depends on its
/// acquirer, but crossed pairs can still hold and wait, so some graphs
/// deadlock.
inline desim::TaskGraph random_graph(Rng& r, const RandomGraphOptions& opt = {}) {
  using namespace desim;
  TaskGraph g;
  g.resources = {{"gpu", ResourceKind::kGpuCompute, 1, false},
                 {"h2d", ResourceKind::kH2dChannel, 1, true},
                 {"d2h", ResourceKind::kD2hChannel, 1, true},
                 {"cpu", ResourceKind::kCpuUpdate, 1, false}};
  g.pools = {{"a", static_cast<int>(r.uniform_int(1, 2))}, {"b", static_cast<int>(r.uniform_int(1, 3))}};
  const int n = static_cast<int>(r.uniform_int(1, opt.max_tasks));
  const std::vector<Phase> phases{Phase::kBwd, Phase::kTransfer, Phase::kNvmeIo, Phase::kUpdate, Phase::kFwd};
  for (int i = 0; i < n; ++i) {
    Task t;
    t.id = "t" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    t.duration = Duration{r.uniform_int(0, 4) == 0 ? 0 : r.uniform_int(1, 9)};
    t.phase = r.pick(phases);
    t.layer = static_cast<int>(r.uniform_int(0, 3));
    if (r.coin(0.85)) t.resources.push_back(r.pick(std::vector<std::string>{"gpu", "h2d", "d2h", "cpu"}));
    if (r.coin(0.15)) {
      const std::string extra = r.pick(std::vector<std::string>{"gpu", "h2d", "d2h", "cpu"});
      if (t.resources.empty() || t.resources.front() != extra) t.resources.push_back(extra);
    }
    for (int j = 0; j < i; ++j) {
      if (r.coin(0.25)) t.deps.push_back(g.tasks[static_cast<std::size_t>(j)].id);
    }
    g.tasks.push_back(std::move(t));
  }
  // Token pairs: acquirer i, releaser j ≥ i reachable from i.
  for (int i = 0; i < n; ++i) {
    if (!r.coin(0.3)) continue;
    const std::string pool = r.coin() ? "a" : "b";
    const int j = static_cast<int>(r.uniform_int(i, n - 1));
    auto& acq = g.tasks[static_cast<std::size_t>(i)];
    auto& rel = g.tasks[static_cast<std::size_t>(j)];
    acq.acquires.push_back(pool);
    rel.releases.push_back(pool);
    if (j != i && std::find(rel.deps.begin(), rel.deps.end(), acq.id) == rel.deps.end()) {
      rel.deps.push_back(acq.id);
    }
  }
  if (!opt.allow_class_contention) {
    // Give a fresh layer to any task whose class is already taken by a task
    // it could contend with.
    int fresh = 100;
    auto contends = [](const Task& a, const Task& b) {
      if (!a.acquires.empty() && !b.acquires.empty()) return true;
      for (const auto& x : a.resources) {
        if (x == "h2d" || x == "d2h") continue;
        if (std::find(b.resources.begin(), b.resources.end(), x) != b.resources.end()) return true;
      }
      return false;
    };
    for (std::size_t i = 0; i < g.tasks.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        auto& a = g.tasks[j];
        auto& b = g.tasks[i];
        if (a.phase == b.phase && a.layer == b.layer && contends(a, b)) {
          b.layer = fresh++;
          j = static_cast<std::size_t>(-1);  // rescan against the new class
        }
      }
    }
  }
  return g;
}

}  // namespace slidesim::testing
