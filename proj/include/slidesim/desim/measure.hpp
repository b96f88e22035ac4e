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

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "slidesim/costmodel.hpp"
#include "slidesim/desim/builders.hpp"
#include "slidesim/desim/graph.hpp"
#include "slidesim/footprint.hpp"

namespace slidesim::desim {

struct StepMetrics {
  Duration makespan{0};
  std::map<std::string, Duration> per_resource_busy;
  double gpu_utilization = 0.0;
  // GPU busy fraction between the first backward start and last backward finish.
  double backward_gpu_utilization = 0.0;
  // (layer, eta) for every layer with offload work, in forward order.
  std::vector<std::pair<int, double>> measured_eta_per_layer;
  double eta_min = std::numeric_limits<double>::infinity();
  double tokens_per_s = 0.0;
  double achieved_flops = 0.0;
  TierUsage peak_mem;
};

namespace measure_detail {

struct Usage {
  Duration at;
  int order;  // frees (0) before allocations (1) at equal times
  std::int64_t gpu;
  std::int64_t cpu;
  std::int64_t nvme;
};

}  // namespace measure_detail

/// Replays acquire/release and activation movement against the footprint
/// model and returns the high-water mark of each tier. Buffer pools count
/// only while a token is held, so the result never exceeds the static
/// tier_usage of the same config.
inline TierUsage replay_memory(const Timeline& tl, const TaskGraph& g, const ExperimentConfig& c) {
  using measure_detail::Usage;
  const auto rows = tier_layout(c);
  auto row = [&](const char* tier, const char* component) -> std::int64_t {
    for (const auto& r : rows) {
      if (r.tier == tier && r.component == component) return static_cast<std::int64_t>(r.bytes);
    }
    return 0;
  };
  const auto p_max = static_cast<std::int64_t>(max_layer_params(c.model));
  const auto act = static_cast<std::int64_t>(activation_layer_bytes(c.workload, c.model.hidden_size));
  const auto target = c.policy.activation_target;
  const bool act_in_unit = target != ActivationTarget::kGpuResident;

  std::int64_t gpu = row("gpu", "output_layer") + row("gpu", "workspace");
  if (!act_in_unit) gpu += row("gpu", "activations");
  std::int64_t cpu = row("cpu", "master_params") + row("cpu", "optimizer_states");
  std::int64_t nvme = row("nvme", "master_params") + row("nvme", "optimizer_states");

  std::unordered_map<std::string, const Task*> by_id;
  for (const auto& t : g.tasks) by_id[t.id] = &t;

  std::vector<Usage> ev;
  auto pool_bytes = [&](const std::string& pool, std::int64_t& dg, std::int64_t& dc) {
    if (pool == kCacheUnits) dg += 4 * p_max + (act_in_unit ? act : 0);
    if (pool == kGradBuffers || pool == kConvertBuffers) dc += 2 * p_max;
    if (pool == kActStaging) dc += act;
  };
  for (const auto& e : tl.entries) {
    const Task& t = *by_id.at(e.task);
    std::int64_t g_on = 0, c_on = 0, g_off = 0, c_off = 0, n_on = 0, n_off = 0;
    for (const auto& a : t.acquires) pool_bytes(a, g_on, c_on);
    for (const auto& r : t.releases) pool_bytes(r, g_off, c_off);
    // A checkpoint occupies its host tier from the start of its offload
    // until its prefetch completes.
    if (t.role == "act_offload") {
      (target == ActivationTarget::kNvme ? n_on : c_on) += act;
    } else if (t.role == "act_prefetch") {
      (target == ActivationTarget::kNvme ? n_off : c_off) += act;
    }
    ev.push_back({e.start, 1, g_on, c_on, n_on});
    ev.push_back({e.finish, 0, -g_off, -c_off, -n_off});
  }
  std::sort(ev.begin(), ev.end(), [](const Usage& a, const Usage& b) {
    return a.at != b.at ? a.at < b.at : a.order < b.order;
  });
  TierUsage peak{static_cast<Bytes>(gpu), static_cast<Bytes>(cpu), static_cast<Bytes>(nvme)};
  for (const auto& u : ev) {
    gpu += u.gpu;
    cpu += u.cpu;
    nvme += u.nvme;
    peak.gpu_peak = std::max(peak.gpu_peak, static_cast<Bytes>(std::max<std::int64_t>(gpu, 0)));
    peak.cpu_peak = std::max(peak.cpu_peak, static_cast<Bytes>(std::max<std::int64_t>(cpu, 0)));
    peak.nvme_peak = std::max(peak.nvme_peak, static_cast<Bytes>(std::max<std::int64_t>(nvme, 0)));
  }
  return peak;
}

/// Utilization, per-layer hiding factors, throughput and memory peaks of a
/// simulated step.
inline StepMetrics measure(const Timeline& tl, const TaskGraph& g, const ExperimentConfig& c) {
  StepMetrics m;
  m.makespan = tl.makespan;
  std::unordered_map<std::string, const Task*> by_id;
  for (const auto& t : g.tasks) by_id[t.id] = &t;

  for (const auto& r : g.resources) m.per_resource_busy[r.id] = Duration{0};
  Duration bwd_lo = Duration::max();
  Duration bwd_hi{0};
  struct LayerSums {
    Duration bwd{0};
    Duration offload{0};
  };
  std::map<int, LayerSums> layer;
  for (const auto& e : tl.entries) {
    const Task& t = *by_id.at(e.task);
    for (const auto& r : t.resources) m.per_resource_busy[r] += t.duration;
    if (t.role == "bwd") {
      bwd_lo = std::min(bwd_lo, e.start);
      bwd_hi = std::max(bwd_hi, e.finish);
      layer[t.layer].bwd += t.duration;
    } else if (t.role == "grad_d2h" || t.role == "update" || t.role == "state_read" ||
               t.role == "state_write") {
      layer[t.layer].offload += t.duration;
    }
  }

  const Duration gpu_busy = m.per_resource_busy.count(kGpu) ? m.per_resource_busy[kGpu] : Duration{0};
  if (m.makespan.count() > 0) {
    m.gpu_utilization = static_cast<double>(gpu_busy.count()) / static_cast<double>(m.makespan.count());
  }
  m.backward_gpu_utilization = m.gpu_utilization;
  if (bwd_lo < bwd_hi) {
    Duration in_window{0};
    for (const auto& e : tl.entries) {
      const Task& t = *by_id.at(e.task);
      if (std::find(t.resources.begin(), t.resources.end(), kGpu) == t.resources.end()) continue;
      const auto lo = std::max(e.start, bwd_lo);
      const auto hi = std::min(e.finish, bwd_hi);
      if (hi > lo) in_window += hi - lo;
    }
    m.backward_gpu_utilization =
        static_cast<double>(in_window.count()) / static_cast<double>((bwd_hi - bwd_lo).count());
  }

  for (const auto& [idx, s] : layer) {
    if (s.offload.count() <= 0) continue;
    const double eta = static_cast<double>(s.bwd.count()) / static_cast<double>(s.offload.count());
    m.measured_eta_per_layer.emplace_back(idx, eta);
    m.eta_min = std::min(m.eta_min, eta);
  }

  const double secs = to_seconds(m.makespan);
  if (secs > 0.0) {
    const auto tokens = static_cast<double>(c.workload.tokens());
    m.tokens_per_s = tokens / secs;
    m.achieved_flops = 8.0 * static_cast<double>(c.model.total_params()) * tokens / secs;
  }
  m.peak_mem = replay_memory(tl, g, c);
  return m;
}

}  // namespace slidesim::desim
