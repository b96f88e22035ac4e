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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <stdexcept>
#include <vector>

#include "slidesim/footprint.hpp"
#include "slidesim/units.hpp"
#include "slidesim/workload.hpp"

namespace slidesim {

/// Per-layer latencies. The headline fields are the quantities the overlap
/// conditions are stated in; the component fields split them by the
/// resource that actually does the work.
struct LayerTimings {
  Duration t_fwd{0};
  Duration t_bwd{0};          // recompute + gradient math
  Duration t_param_h2d{0};    // host conversion + PCIe copy
  Duration t_grad_d2h{0};
  Duration t_update{0};       // CPU Adam + optimizer-state NVMe I/O
  Duration t_act_offload{0};
  Duration t_act_prefetch{0};

  Duration convert{0};
  Duration h2d_copy{0};
  Duration cpu_update{0};
  Duration nvme_state_read{0};
  Duration nvme_state_write{0};
};

enum class NvmeDirection { kToNvme, kFromNvme };

enum class PathResource { kNvmeChannel, kH2dChannel, kD2hChannel };

/// Cost of moving an activation between GPU and the NVMe tier.
struct PathCost {
  Duration duration{0};
  std::vector<PathResource> resources;
  bool needs_staging_token = false;
};

/// With GPUDirect Storage the copy goes straight to the drives and runs at
/// the slower of the two links. Without it the data bounces through pinned
/// host memory, occupying both links and a staging slot for the sum of both
/// hops.
inline PathCost gds_path(const ExperimentConfig& c, Bytes bytes, NvmeDirection dir) {
  const auto& h = c.hardware;
  if (h.nvme_drives < 1) throw std::invalid_argument("gds_path: no NVMe tier configured");
  const bool to_nvme = dir == NvmeDirection::kToNvme;
  const double nvme_bw = to_nvme ? h.nvme_write_total() : h.nvme_read_total();
  const double pcie_bw = static_cast<double>(to_nvme ? h.pcie_d2h_bw : h.pcie_h2d_bw);
  if (!(nvme_bw > 0.0) || !(pcie_bw > 0.0)) {
    throw std::invalid_argument("gds_path: zero bandwidth on the NVMe path");
  }
  const auto b = static_cast<double>(bytes);
  PathCost cost;
  if (h.gds_enabled) {
    cost.duration = seconds_to_duration(b / std::min(nvme_bw, pcie_bw));
    cost.resources = {PathResource::kNvmeChannel};
  } else {
    cost.duration = seconds_to_duration(b * (1.0 / nvme_bw + 1.0 / pcie_bw));
    cost.resources = {PathResource::kNvmeChannel,
                      to_nvme ? PathResource::kD2hChannel : PathResource::kH2dChannel};
    cost.needs_staging_token = true;
  }
  return cost;
}

namespace costmodel_detail {

inline double rate_or_throw(double rate, const char* what) {
  if (!(rate > 0.0)) throw std::invalid_argument(std::string("zero rate on required path: ") + what);
  return rate;
}

}  // namespace costmodel_detail

/// Bytes of optimizer state (and master copy, if it lives there) read from
/// and written back to NVMe per parameter of a layer.
inline double nvme_state_bytes_per_param(const OffloadPolicy& p) {
  return 8.0 * p.optimizer_offload_fraction + (p.master_params_on_nvme ? 4.0 : 0.0);
}

inline LayerTimings layer_timings(const ExperimentConfig& c, const PseudoLayer& layer) {
  using costmodel_detail::rate_or_throw;
  const auto& h = c.hardware;
  const auto& p = c.policy;
  LayerTimings t;

  const double tokens = static_cast<double>(c.workload.tokens());
  const auto compute = static_cast<double>(layer.compute_params);
  if (compute > 0.0) {
    const double flops = rate_or_throw(h.gpu_flops * h.gpu_efficiency, "gpu_flops");
    t.t_fwd = seconds_to_duration(2.0 * compute * tokens / flops);
    t.t_bwd = seconds_to_duration(6.0 * compute * tokens / flops);
  }

  const auto params = static_cast<double>(layer.params);
  if (params > 0.0) {
    t.convert = seconds_to_duration(params / rate_or_throw(h.cpu_convert_rate, "cpu_convert_rate"));
    t.h2d_copy = seconds_to_duration(
        2.0 * params / rate_or_throw(static_cast<double>(h.pcie_h2d_bw), "pcie_h2d_bw"));
    t.t_grad_d2h = seconds_to_duration(
        2.0 * params / rate_or_throw(static_cast<double>(h.pcie_d2h_bw), "pcie_d2h_bw"));
    t.cpu_update =
        seconds_to_duration(params / rate_or_throw(h.cpu_update_rate, "cpu_update_rate"));
    const double state_bytes = nvme_state_bytes_per_param(p) * params;
    if (state_bytes > 0.0) {
      t.nvme_state_read =
          seconds_to_duration(state_bytes / rate_or_throw(h.nvme_read_total(), "nvme_read_bw"));
      t.nvme_state_write =
          seconds_to_duration(state_bytes / rate_or_throw(h.nvme_write_total(), "nvme_write_bw"));
    }
  }
  t.t_param_h2d = t.convert + t.h2d_copy;
  t.t_update = t.cpu_update + t.nvme_state_read + t.nvme_state_write;

  if (layer.kind == LayerKind::kTransformer) {
    const Bytes act = activation_layer_bytes(c.workload, c.model.hidden_size);
    switch (p.activation_target) {
      case ActivationTarget::kGpuResident:
        break;
      case ActivationTarget::kCpu:
        t.t_act_offload = seconds_to_duration(static_cast<double>(act) /
                                              static_cast<double>(h.pcie_d2h_bw));
        t.t_act_prefetch = seconds_to_duration(static_cast<double>(act) /
                                               static_cast<double>(h.pcie_h2d_bw));
        break;
      case ActivationTarget::kNvme:
        t.t_act_offload = gds_path(c, act, NvmeDirection::kToNvme).duration;
        t.t_act_prefetch = gds_path(c, act, NvmeDirection::kFromNvme).duration;
        break;
    }
  }
  return t;
}

/// The representative decoder layer (pseudo-layers excluded).
inline LayerTimings transformer_layer_timings(const ExperimentConfig& c) {
  for (const auto& l : pseudo_layers(c.model)) {
    if (l.kind == LayerKind::kTransformer) return layer_timings(c, l);
  }
  throw std::logic_error("model has no transformer layers");
}

/// Backward compute over offload cost (gradient copy plus update). Values at
/// or above one mean the offload work is fully hidden.
inline double hiding_factor(Duration t_bwd, Duration t_d2h, Duration t_update) {
  const auto denom = t_d2h + t_update;
  if (denom.count() <= 0) throw std::domain_error("hiding factor undefined: nothing to hide");
  return static_cast<double>(t_bwd.count()) / static_cast<double>(denom.count());
}

/// Positive when the forward pass of a layer covers the next prefetch.
inline Duration forward_overlap_slack(Duration t_fwd, Duration t_param_h2d) {
  return t_fwd - t_param_h2d;
}

/// Smallest integer batch whose backward compute covers gradient copy plus
/// update, given the per-sample backward time. nullopt when no batch size
/// can satisfy it. Inputs are in any common unit.
inline std::optional<std::int64_t> critical_batch_size(double per_sample_bwd, double t_d2h,
                                                       double t_update) {
  const double need = t_d2h + t_update;
  if (need <= 0.0) return 1;
  if (!(per_sample_bwd > 0.0)) return std::nullopt;
  const double ratio = need / per_sample_bwd;
  if (!std::isfinite(ratio) || ratio > 9e18) return std::nullopt;
  // A ratio within rounding of an integer is that integer; otherwise ceil
  // would flip under a uniform rescaling of the inputs.
  const double nearest = std::round(ratio);
  const double b = std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest) ? nearest
                                                                              : std::ceil(ratio);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(b));
}

inline std::optional<std::int64_t> critical_batch_size(const ExperimentConfig& c) {
  ExperimentConfig one = c;
  one.workload.batch_size = 1;
  one.policy.lce_chunk_rows = std::min(one.policy.lce_chunk_rows, one.workload.tokens());
  const auto t = transformer_layer_timings(one);
  return critical_batch_size(to_seconds(t.t_bwd), to_seconds(t.t_grad_d2h),
                             to_seconds(t.t_update));
}

// ---------------------------------------------------------------------------
// Closed-form step time.
// ---------------------------------------------------------------------------

struct AnalyticalStep {
  Duration forward{0};
  Duration backward{0};
  Duration step{0};
  double tokens_per_s = 0.0;
  double achieved_flops = 0.0;
};

namespace costmodel_detail {

/// Makespan of a permutation flow shop: every job visits the stages in
/// order, each stage handles one job at a time.
inline Duration flow_shop_makespan(const std::vector<std::vector<Duration>>& jobs) {
  if (jobs.empty()) return Duration{0};
  std::vector<Duration> done(jobs.front().size(), Duration{0});
  for (const auto& job : jobs) {
    Duration prev{0};
    for (std::size_t k = 0; k < job.size(); ++k) {
      done[k] = std::max(done[k], prev) + job[k];
      prev = done[k];
    }
  }
  return done.back();
}

struct Stage {
  std::vector<std::string> resources;
  Duration duration{0};
  // Buffer pools taken when the stage starts and returned when it ends.
  std::vector<std::string> acquire{};
  std::vector<std::string> release{};
  Duration not_before{0};
};

/// Release time of every slot of each buffer pool.
using PoolSlots = std::map<std::string, std::vector<Duration>>;

/// Progress of one job through a resource-keyed flow shop.
struct JobState {
  Duration prev{0};
  std::map<std::string, std::size_t> held;
};

/// Runs one stage of a job. `free_at` and `pools` carry release times, so
/// jobs and phases chain; a stage that acquires a pool waits for its
/// earliest free slot. Returns the stage finish.
inline Duration run_stage(const Stage& st, JobState& job, std::map<std::string, Duration>& free_at,
                          PoolSlots& pools) {
  Duration start = std::max(job.prev, st.not_before);
  for (const auto& r : st.resources) start = std::max(start, free_at[r]);
  for (const auto& pool : st.acquire) {
    auto& slots = pools.at(pool);
    const auto it = std::min_element(slots.begin(), slots.end());
    job.held[pool] = static_cast<std::size_t>(it - slots.begin());
    start = std::max(start, *it);
  }
  job.prev = start + st.duration;
  for (const auto& r : st.resources) free_at[r] = job.prev;
  for (const auto& pool : st.release) pools.at(pool)[job.held.at(pool)] = job.prev;
  return job.prev;
}

}  // namespace costmodel_detail

/// Step time of the sliding pipeline. Forward (layer order) and backward
/// (reverse order) are flow shops chained through per-resource release
/// times and buffer pools; optimizer state traffic on NVMe follows the
/// order in which staging slots are recycled.
inline AnalyticalStep analytical_step_time(const ExperimentConfig& c) {
  using costmodel_detail::Stage;
  const auto layers = pseudo_layers(c.model);
  const auto& p = c.policy;
  std::vector<LayerTimings> t;
  t.reserve(layers.size());
  for (const auto& l : layers) t.push_back(layer_timings(c, l));
  const std::size_t n = t.size();

  const bool act_on_nvme = p.activation_target == ActivationTarget::kNvme;
  // Checkpoints on NVMe occupy the drives, and also a PCIe stream unless
  // GPU-direct.
  auto act_lanes = [&](const char* stream) -> std::vector<std::string> {
    if (!act_on_nvme) return {stream};
    if (c.hardware.gds_enabled) return {"nvme"};
    return {stream, "nvme"};
  };
  auto prefetch_stages = [&](const LayerTimings& lt) {
    std::vector<Stage> s;
    s.push_back({{"cpu_convert"}, lt.convert, {"convert"}, {}});
    s.push_back({{"h2d"}, lt.h2d_copy, {"cache"}, {"convert"}});
    return s;
  };
  auto flat = [](const std::vector<std::vector<Stage>>& jobs) {
    std::vector<std::vector<Duration>> out;
    for (const auto& j : jobs) {
      out.emplace_back();
      for (const auto& st : j) out.back().push_back(st.duration);
    }
    return out;
  };

  std::vector<std::vector<Stage>> fwd_jobs;
  for (const auto& lt : t) {
    auto s = prefetch_stages(lt);
    s.push_back({{"gpu"}, lt.t_fwd});
    s.push_back({act_lanes("d2h"), lt.t_act_offload, {}, {"cache"}});
    fwd_jobs.push_back(std::move(s));
  }

  Duration state_io{0};
  for (const auto& lt : t) state_io += lt.nvme_state_read + lt.nvme_state_write;
  const bool staged = state_io.count() > 0;
  std::vector<std::vector<Stage>> bwd_jobs;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& lt = t[n - 1 - j];
    auto s = prefetch_stages(lt);
    s.push_back({act_lanes("h2d"), lt.t_act_prefetch});
    s.push_back({{"gpu"}, lt.t_bwd});
    s.push_back({{"d2h"}, lt.t_grad_d2h, {"grad"}, {"cache"}});
    s.push_back({{"cpu"}, lt.cpu_update, {}, {"grad"}});
    bwd_jobs.push_back(std::move(s));
  }

  AnalyticalStep r;
  r.forward = costmodel_detail::flow_shop_makespan(flat(fwd_jobs));
  r.backward = costmodel_detail::flow_shop_makespan(flat(bwd_jobs));

  std::map<std::string, Duration> free_at;
  auto slots = [](std::int64_t depth) {
    return std::vector<Duration>(static_cast<std::size_t>(std::max<std::int64_t>(1, depth)),
                                 Duration{0});
  };
  costmodel_detail::PoolSlots pools{{"cache", slots(p.window_units)},
                                    {"convert", slots(p.convert_buffer_depth)},
                                    {"grad", slots(p.grad_buffer_depth)}};
  // Optimizer state reads for the first layers of the backward pass need
  // only a staging slot, so they take the drives at once.
  const auto depth =
      static_cast<std::size_t>(std::max<std::int64_t>(1, p.optimizer_staging_depth));
  std::vector<Duration> read_done(n, Duration{-1});
  if (staged) {
    for (std::size_t j = 0; j < std::min(depth, n); ++j) {
      free_at["nvme"] += t[n - 1 - j].nvme_state_read;
      read_done[j] = free_at["nvme"];
    }
  }
  std::vector<Duration> fwd_done(n);
  for (std::size_t l = 0; l < n; ++l) {
    costmodel_detail::JobState js;
    for (const auto& st : fwd_jobs[l]) fwd_done[l] = costmodel_detail::run_stage(st, js, free_at, pools);
  }
  // Backward begins once the GPU has finished the forward pass, and a
  // layer's activation cannot come back before it has been offloaded.
  std::vector<Duration> ready(n, free_at["gpu"]);
  for (std::size_t j = 0; j < n; ++j) {
    if (t[n - 1 - j].t_act_offload.count() > 0) ready[j] = std::max(ready[j], fwd_done[n - 1 - j]);
  }
  // An update also waits for its state read. The write of a layer returns
  // its staging slot to the read S layers later; when the drives free up
  // they serve the ready transfer earliest in backward order.
  struct Io {
    Duration ready;
    std::size_t job;
    bool write;
  };
  std::vector<Io> pending;
  Duration& channel = free_at["nvme"];
  auto serve_one = [&] {
    auto pick = pending.begin();
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      const bool ready = it->ready <= channel;
      const bool pick_ready = pick->ready <= channel;
      if (ready != pick_ready ? ready
                              : (ready ? it->job < pick->job
                                       : std::tie(it->ready, it->job) < std::tie(pick->ready, pick->job))) {
        pick = it;
      }
    }
    const Io io = *pick;
    pending.erase(pick);
    const auto& lt = t[n - 1 - io.job];
    channel = std::max(channel, io.ready) + (io.write ? lt.nvme_state_write : lt.nvme_state_read);
    if (!io.write) {
      read_done[io.job] = channel;
    } else if (io.job + depth < n) {
      pending.push_back({channel, io.job + depth, false});
    }
  };
  r.step = Duration{0};
  for (std::size_t j = 0; j < n; ++j) {
    const auto& job = bwd_jobs[j];
    costmodel_detail::JobState js{ready[j], {}};
    for (std::size_t k = 0; k + 1 < job.size(); ++k) {
      costmodel_detail::run_stage(job[k], js, free_at, pools);
    }
    Stage update = job.back();
    if (staged) {
      while (read_done[j] < Duration{0}) serve_one();
      update.not_before = read_done[j];
    }
    const Duration done = costmodel_detail::run_stage(update, js, free_at, pools);
    r.step = std::max(r.step, done);
    if (staged) pending.push_back({done, j, true});
  }
  while (!pending.empty()) serve_one();
  r.step = std::max(r.step, channel);

  const double secs = to_seconds(r.step);
  if (secs > 0.0) {
    const auto tokens = static_cast<double>(c.workload.tokens());
    r.tokens_per_s = tokens / secs;
    r.achieved_flops = 8.0 * static_cast<double>(c.model.total_params()) * tokens / secs;
  }
  return r;
}

}  // namespace slidesim
