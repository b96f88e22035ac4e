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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slidesim/units.hpp"
#include "slidesim/workload.hpp"

namespace slidesim {

struct FootprintBreakdown {
  Bytes params_bytes = 0;
  Bytes grads_bytes = 0;
  Bytes master_params_bytes = 0;
  Bytes optimizer_state_bytes = 0;
  Bytes activation_bytes = 0;
  Bytes workspace_bytes = 0;
  Bytes total_bytes = 0;

  bool operator==(const FootprintBreakdown&) const = default;
};

struct TierUsage {
  Bytes gpu_peak = 0;
  Bytes cpu_peak = 0;
  Bytes nvme_peak = 0;

  bool operator==(const TierUsage&) const = default;
};

/// Mixed-precision Adam footprint with nothing offloaded: BF16 params and
/// grads, FP32 master copy, two FP32 moments.
inline FootprintBreakdown static_requirement(std::uint64_t num_params) {
  FootprintBreakdown f;
  f.params_bytes = 2 * num_params;
  f.grads_bytes = 2 * num_params;
  f.master_params_bytes = 4 * num_params;
  f.optimizer_state_bytes = 8 * num_params;
  f.total_bytes = f.params_bytes + f.grads_bytes + f.master_params_bytes +
                  f.optimizer_state_bytes;
  return f;
}

/// Checkpointed activation of one layer: the boundary tensor only.
inline Bytes activation_layer_bytes(const WorkloadShape& shape, std::int64_t hidden_size) {
  return static_cast<Bytes>(shape.batch_size) * static_cast<Bytes>(shape.seq_len) *
         static_cast<Bytes>(hidden_size) * static_cast<Bytes>(shape.bytes_low_precision);
}

struct LceMemory {
  Bytes full_bytes = 0;
  Bytes chunked_bytes = 0;
  double reduction_fraction = 0.0;
};

/// Output-layer memory with and without chunked LinearCrossEntropy. The
/// unfused path materializes logits and their gradient for every token; the
/// fused path holds one chunk of each.
inline LceMemory lce_output_memory(const WorkloadShape& shape, std::int64_t vocab,
                                   std::int64_t chunk_rows) {
  const std::int64_t rows = shape.tokens();
  if (chunk_rows < 1 || chunk_rows > rows) {
    throw std::invalid_argument("lce chunk_rows must lie in [1, batch_size·seq_len]");
  }
  const auto elem = static_cast<Bytes>(shape.bytes_low_precision);
  const auto v = static_cast<Bytes>(vocab);
  LceMemory m;
  m.full_bytes = 2 * static_cast<Bytes>(rows) * v * elem;
  m.chunked_bytes = 2 * static_cast<Bytes>(chunk_rows) * v * elem;
  m.reduction_fraction = 1.0 - static_cast<double>(chunk_rows) / static_cast<double>(rows);
  return m;
}

inline Bytes output_layer_bytes(const ExperimentConfig& c) {
  const auto lce = lce_output_memory(c.workload, c.model.vocab_size, c.policy.lce_chunk_rows);
  return c.policy.lce_enabled ? lce.chunked_bytes : lce.full_bytes;
}

/// One GPU cache unit: BF16 parameters and gradients of the largest layer.
inline Bytes cache_unit_bytes(const ModelSpec& m) { return 4 * max_layer_params(m); }

/// One row of the per-tier layout.
struct TierComponent {
  std::string tier;
  std::string component;
  Bytes bytes = 0;
};

/// Resident bytes per tier and component. Every peak below is the sum of
/// its tier's rows.
inline std::vector<TierComponent> tier_layout(const ExperimentConfig& c) {
  const auto& m = c.model;
  const auto& p = c.policy;
  const std::uint64_t n_params = m.total_params();
  const std::uint64_t p_max = max_layer_params(m);
  const Bytes act = activation_layer_bytes(c.workload, m.hidden_size);
  const auto w = static_cast<Bytes>(p.window_units);
  const auto layers = static_cast<Bytes>(m.num_layers);

  // Integer split so cpu + nvme optimizer bytes equal 8N exactly.
  const Bytes opt_total = 8 * n_params;
  const auto opt_nvme = static_cast<Bytes>(
      std::llround(static_cast<double>(opt_total) * p.optimizer_offload_fraction));
  const Bytes master_total = 4 * n_params;

  std::vector<TierComponent> rows;
  rows.push_back({"gpu", "cache_units", w * cache_unit_bytes(m)});
  rows.push_back({"gpu", "activations",
                  p.activation_target == ActivationTarget::kGpuResident ? layers * act : w * act});
  rows.push_back({"gpu", "output_layer", output_layer_bytes(c)});
  rows.push_back({"gpu", "workspace", p.workspace_bytes});

  rows.push_back({"cpu", "master_params", p.master_params_on_nvme ? 0 : master_total});
  rows.push_back({"cpu", "optimizer_states", opt_total - opt_nvme});
  rows.push_back({"cpu", "grad_buffers", static_cast<Bytes>(p.grad_buffer_depth) * 2 * p_max});
  rows.push_back(
      {"cpu", "convert_buffers", static_cast<Bytes>(p.convert_buffer_depth) * 2 * p_max});
  Bytes cpu_act = 0;
  if (p.activation_target == ActivationTarget::kCpu) {
    cpu_act = layers * act;
  } else if (p.activation_target == ActivationTarget::kNvme && !c.hardware.gds_enabled) {
    cpu_act = 2 * act;  // pinned bounce buffers
  }
  rows.push_back({"cpu", "activations", cpu_act});

  rows.push_back({"nvme", "master_params", p.master_params_on_nvme ? master_total : 0});
  rows.push_back({"nvme", "optimizer_states", opt_nvme});
  rows.push_back(
      {"nvme", "activations", p.activation_target == ActivationTarget::kNvme ? layers * act : 0});
  return rows;
}

inline Bytes tier_total(const std::vector<TierComponent>& rows, const std::string& tier) {
  Bytes sum = 0;
  for (const auto& r : rows) {
    if (r.tier == tier) sum += r.bytes;
  }
  return sum;
}

/// Peak VRAM: W cache units plus their activation slots, the output layer
/// and workspace. Independent of num_layers unless activations stay on GPU.
inline Bytes gpu_peak(const ExperimentConfig& c) { return tier_total(tier_layout(c), "gpu"); }
inline Bytes cpu_peak(const ExperimentConfig& c) { return tier_total(tier_layout(c), "cpu"); }
inline Bytes nvme_peak(const ExperimentConfig& c) { return tier_total(tier_layout(c), "nvme"); }

inline TierUsage tier_usage(const ExperimentConfig& c) {
  const auto rows = tier_layout(c);
  return {tier_total(rows, "gpu"), tier_total(rows, "cpu"), tier_total(rows, "nvme")};
}

// ---------------------------------------------------------------------------
// Maximum trainable model search.
// ---------------------------------------------------------------------------

/// A model family indexed by width. Width grows in `hidden_step` increments
/// and depth follows width at a fixed aspect ratio, so total parameters are
/// monotone in the index.
struct ModelFamily {
  std::int64_t hidden_step = 128;
  double hidden_per_layer = 128.0;  // h / n, e.g. 4096 / 32
  double ff_multiplier = kDefaultFfMultiplier;
  std::int64_t vocab_size = 128256;
  bool tied_embeddings = false;

  ModelSpec at(std::int64_t index) const {
    ModelSpec m;
    m.hidden_size = index * hidden_step;
    m.num_layers = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(m.hidden_size) / hidden_per_layer));
    m.params_per_layer = derive_layer_params(m.hidden_size, ff_multiplier);
    m.vocab_size = vocab_size;
    m.embedding_params = static_cast<std::uint64_t>(vocab_size) *
                         static_cast<std::uint64_t>(m.hidden_size);
    m.head_params = m.embedding_params;
    m.tied_embeddings = tied_embeddings;
    return m;
  }
};

struct MaxModelResult {
  ModelSpec model;
  std::uint64_t total_params = 0;
  TierUsage usage;
  // Which tier stops the next family member from fitting.
  std::string binding_tier;
};

inline constexpr double kDefaultHeadroom = 0.95;

namespace footprint_detail {

inline std::string first_violation(const ExperimentConfig& c, double headroom) {
  const auto u = tier_usage(c);
  const auto& h = c.hardware;
  const auto cap = [&](Bytes b) { return static_cast<double>(b) * headroom; };
  if (static_cast<double>(u.gpu_peak) > cap(h.vram_bytes)) return "gpu";
  if (static_cast<double>(u.cpu_peak) > cap(h.ram_bytes)) return "cpu";
  if (u.nvme_peak > 0 && h.nvme_capacity_bytes > 0 &&
      static_cast<double>(u.nvme_peak) > cap(h.nvme_capacity_bytes)) {
    return "nvme";
  }
  return {};
}

}  // namespace footprint_detail

/// Largest family member whose GPU, CPU and NVMe peaks fit under
/// `headroom` times the respective capacity. nullopt when even the smallest
/// member does not fit.
inline std::optional<MaxModelResult> max_trainable_model(const HardwareSpec& hardware,
                                                         const OffloadPolicy& policy,
                                                         const WorkloadShape& shape,
                                                         const ModelFamily& family = {},
                                                         double headroom = kDefaultHeadroom) {
  auto config_at = [&](std::int64_t index) {
    ExperimentConfig c;
    c.model = family.at(index);
    c.workload = shape;
    c.hardware = hardware;
    c.policy = policy;
    c.policy.lce_chunk_rows = std::min(c.policy.lce_chunk_rows, shape.tokens());
    return c;
  };
  auto fits = [&](std::int64_t index) {
    return footprint_detail::first_violation(config_at(index), headroom).empty();
  };
  if (!fits(1)) return std::nullopt;

  // Exponential probe, then bisection on [lo feasible, hi infeasible).
  std::int64_t lo = 1;
  std::int64_t hi = 2;
  constexpr std::int64_t kLimit = std::int64_t{1} << 20;
  while (hi < kLimit && fits(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi >= kLimit && fits(hi)) lo = hi;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }

  MaxModelResult r;
  const auto best = config_at(lo);
  r.model = best.model;
  r.total_params = best.model.total_params();
  r.usage = tier_usage(best);
  r.binding_tier = footprint_detail::first_violation(config_at(lo + 1), headroom);
  return r;
}

}  // namespace slidesim
