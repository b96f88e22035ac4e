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
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "slidesim/costmodel.hpp"
#include "slidesim/desim/graph.hpp"
#include "slidesim/workload.hpp"

namespace slidesim::desim {

// Resource and pool names shared by the builders, metrics and reports.
inline constexpr const char* kGpu = "gpu";
inline constexpr const char* kH2d = "h2d";
inline constexpr const char* kD2h = "d2h";
inline constexpr const char* kCpuUpdate = "cpu_update";
inline constexpr const char* kCpuConvert = "cpu_convert";
inline constexpr const char* kNvme = "nvme";

inline constexpr const char* kCacheUnits = "cache_units";
inline constexpr const char* kGradBuffers = "grad_buffers";
inline constexpr const char* kConvertBuffers = "convert_buffers";
inline constexpr const char* kActStaging = "act_staging";
inline constexpr const char* kOptStaging = "opt_staging";

// Pinned bounce buffers for activations going to NVMe without GDS.
inline constexpr int kActStagingSlots = 2;

namespace builder_detail {

inline std::string name(const char* role, int layer) { return std::string(role) + ".L" + std::to_string(layer); }

inline std::string resource_name(PathResource r) {
  switch (r) {
    case PathResource::kNvmeChannel:
      return kNvme;
    case PathResource::kH2dChannel:
      return kH2d;
    case PathResource::kD2hChannel:
      return kD2h;
  }
  return {};
}

}  // namespace builder_detail

/// Task graph of one training step under the layer-sliding schedule.
///
/// Forward, per pseudo-layer i in order: convert (host FP32 -> BF16 into a
/// conversion buffer), h2d copy into a GPU cache unit, forward compute, and
/// activation checkpoint offload, which frees the cache unit. Backward, per
/// layer in reverse: convert and h2d again, activation prefetch, recompute
/// plus backward, gradient d2h into a host gradient buffer (freeing the
/// cache unit), and the CPU update (freeing the gradient buffer). With
/// optimizer states on NVMe the update is bracketed by a state read, which
/// is prefetched through a bounded staging pool, and a state write.
///
/// Task order is issue order for the FIFO resources (h2d, d2h, convert).
inline TaskGraph build_slideformer_graph(const ExperimentConfig& c) {
  using builder_detail::name;
  validate(c);
  const auto& p = c.policy;
  const auto layers = pseudo_layers(c.model);

  std::vector<LayerTimings> timing;
  timing.reserve(layers.size());
  for (const auto& l : layers) timing.push_back(layer_timings(c, l));

  const bool state_io = nvme_state_bytes_per_param(p) > 0.0;
  const bool act_nvme = p.activation_target == ActivationTarget::kNvme;
  const bool act_moves = p.activation_target != ActivationTarget::kGpuResident;
  const Bytes act_bytes = activation_layer_bytes(c.workload, c.model.hidden_size);

  TaskGraph g;
  g.resources = {
      {kGpu, ResourceKind::kGpuCompute, 1, false},
      {kH2d, ResourceKind::kH2dChannel, 1, true},
      {kD2h, ResourceKind::kD2hChannel, 1, true},
      {kCpuUpdate, ResourceKind::kCpuUpdate, 1, false},
      {kCpuConvert, ResourceKind::kCpuConvert, 1, true},
  };
  if (c.hardware.nvme_drives > 0 && (state_io || act_nvme)) {
    g.resources.push_back({kNvme, ResourceKind::kNvmeChannel, 1, false});
  }
  g.pools = {
      {kCacheUnits, static_cast<int>(p.window_units)},
      {kGradBuffers, static_cast<int>(p.grad_buffer_depth)},
      {kConvertBuffers, static_cast<int>(p.convert_buffer_depth)},
  };
  const bool act_staged = act_nvme && !c.hardware.gds_enabled;
  if (act_staged) g.pools.push_back({kActStaging, kActStagingSlots});
  if (state_io) g.pools.push_back({kOptStaging, static_cast<int>(p.optimizer_staging_depth)});

  auto has_act = [&](const PseudoLayer& l) { return act_moves && l.kind == LayerKind::kTransformer; };

  auto act_task = [&](const char* role, int layer, Duration d, bool offload) {
    Task t;
    t.id = name(role, layer);
    t.duration = d;
    t.layer = layer;
    t.phase = Phase::kTransfer;
    t.role = role;
    if (act_nvme) {
      const auto path =
          gds_path(c, act_bytes, offload ? NvmeDirection::kToNvme : NvmeDirection::kFromNvme);
      // Channel order: the PCIe stream first so the FIFO lane is the primary one.
      for (auto it = path.resources.rbegin(); it != path.resources.rend(); ++it) {
        t.resources.push_back(builder_detail::resource_name(*it));
      }
      if (path.needs_staging_token) {
        t.acquires.push_back(kActStaging);
        t.releases.push_back(kActStaging);
      }
    } else {
      t.resources.push_back(offload ? kD2h : kH2d);
    }
    return t;
  };

  // Forward pass.
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const auto& t = timing[k];
    const int i = l.index;
    g.add({name("convert_f", i), t.convert, {kCpuConvert}, {kConvertBuffers}, {}, {}, i,
           Phase::kTransfer, "convert"});
    g.add({name("h2d_f", i), t.h2d_copy, {kH2d}, {kCacheUnits}, {kConvertBuffers},
           {name("convert_f", i)}, i, Phase::kTransfer, "h2d_params"});
    Task fwd{name("fwd", i), t.t_fwd, {kGpu}, {}, {}, {name("h2d_f", i)}, i, Phase::kFwd, "fwd"};
    if (k > 0) fwd.deps.push_back(name("fwd", layers[k - 1].index));
    if (has_act(l)) {
      g.add(std::move(fwd));
      Task off = act_task("act_offload", i, t.t_act_offload, true);
      off.deps.push_back(name("fwd", i));
      off.releases.push_back(kCacheUnits);
      g.add(std::move(off));
    } else {
      fwd.releases.push_back(kCacheUnits);
      g.add(std::move(fwd));
    }
  }

  // Backward pass.
  for (std::size_t r = layers.size(); r-- > 0;) {
    const auto& l = layers[r];
    const auto& t = timing[r];
    const int i = l.index;
    g.add({name("convert_b", i), t.convert, {kCpuConvert}, {kConvertBuffers}, {}, {}, i,
           Phase::kTransfer, "convert"});
    g.add({name("h2d_b", i), t.h2d_copy, {kH2d}, {kCacheUnits}, {kConvertBuffers},
           {name("convert_b", i)}, i, Phase::kTransfer, "h2d_params"});
    Task bwd{name("bwd", i), t.t_bwd, {kGpu}, {}, {}, {name("h2d_b", i)}, i, Phase::kBwd, "bwd"};
    if (r + 1 < layers.size()) {
      bwd.deps.push_back(name("bwd", layers[r + 1].index));
    } else {
      bwd.deps.push_back(name("fwd", i));
    }
    if (has_act(l)) {
      Task pre = act_task("act_prefetch", i, t.t_act_prefetch, false);
      pre.deps = {name("h2d_b", i), name("act_offload", i)};
      g.add(std::move(pre));
      bwd.deps.push_back(name("act_prefetch", i));
    }
    g.add(std::move(bwd));
    g.add({name("grad_d2h", i), t.t_grad_d2h, {kD2h}, {kGradBuffers}, {kCacheUnits},
           {name("bwd", i)}, i, Phase::kTransfer, "grad_d2h"});
    Task update{name("update", i), t.cpu_update, {kCpuUpdate}, {}, {kGradBuffers},
                {name("grad_d2h", i)}, i, Phase::kUpdate, "update"};
    if (state_io) {
      g.add({name("state_read", i), t.nvme_state_read, {kNvme}, {kOptStaging}, {}, {}, i,
             Phase::kNvmeIo, "state_read"});
      update.deps.push_back(name("state_read", i));
      g.add(std::move(update));
      g.add({name("state_write", i), t.nvme_state_write, {kNvme}, {}, {kOptStaging},
             {name("update", i)}, i, Phase::kNvmeIo, "state_write"});
    } else {
      g.add(std::move(update));
    }
  }
  return g;
}

enum class BaselineMode { kSyncUpdate, kNoOffload };

/// The same step with a synchronous update stage: no update may start until
/// backward compute and every gradient copy are done. Host gradient storage
/// is sized for the whole model, as the update cannot drain it early.
inline TaskGraph to_sync_update(TaskGraph g) {
  const Task* last_bwd = nullptr;
  const Task* last_d2h = nullptr;
  for (const auto& t : g.tasks) {
    if (t.role == "bwd" && (last_bwd == nullptr || t.layer < last_bwd->layer)) last_bwd = &t;
    if (t.role == "grad_d2h" && (last_d2h == nullptr || t.layer < last_d2h->layer)) last_d2h = &t;
  }
  const std::string bwd_id = last_bwd ? last_bwd->id : std::string();
  const std::string d2h_id = last_d2h ? last_d2h->id : std::string();
  int grads = 0;
  for (auto& t : g.tasks) {
    if (t.role == "grad_d2h") ++grads;
    if (t.role != "update") continue;
    for (const auto& id : {bwd_id, d2h_id}) {
      if (!id.empty() && std::find(t.deps.begin(), t.deps.end(), id) == t.deps.end()) {
        t.deps.push_back(id);
      }
    }
  }
  for (auto& p : g.pools) {
    if (p.id == kGradBuffers) p.tokens = std::max(p.tokens, grads);
  }
  return g;
}

/// GPU compute only, with dependencies routed through the dropped tasks.
inline TaskGraph to_no_offload(const TaskGraph& g) {
  const auto idx = g.index();
  auto keep = [&](const Task& t) { return t.phase == Phase::kFwd || t.phase == Phase::kBwd; };

  // Nearest kept ancestors of every task.
  std::vector<std::vector<std::string>> memo(g.tasks.size());
  std::vector<bool> done(g.tasks.size(), false);
  std::function<const std::vector<std::string>&(std::size_t)> kept_ancestors =
      [&](std::size_t i) -> const std::vector<std::string>& {
    if (done[i]) return memo[i];
    std::set<std::string> acc;
    for (const auto& d : g.tasks[i].deps) {
      const std::size_t j = idx.at(d);
      if (keep(g.tasks[j])) {
        acc.insert(d);
      } else {
        const auto& up = kept_ancestors(j);
        acc.insert(up.begin(), up.end());
      }
    }
    memo[i].assign(acc.begin(), acc.end());
    done[i] = true;
    return memo[i];
  };

  TaskGraph out;
  std::set<std::string> used;
  for (std::size_t i = 0; i < g.tasks.size(); ++i) {
    const Task& t = g.tasks[i];
    if (!keep(t)) continue;
    Task k = t;
    k.deps = kept_ancestors(i);
    k.acquires.clear();
    k.releases.clear();
    used.insert(k.resources.begin(), k.resources.end());
    out.tasks.push_back(std::move(k));
  }
  for (const auto& r : g.resources) {
    if (used.count(r.id)) out.resources.push_back(r);
  }
  return out;
}

inline TaskGraph build_baseline_graph(const ExperimentConfig& c, BaselineMode mode) {
  auto g = build_slideformer_graph(c);
  return mode == BaselineMode::kSyncUpdate ? to_sync_update(std::move(g)) : to_no_offload(g);
}

}  // namespace slidesim::desim
