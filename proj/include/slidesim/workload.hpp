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
#include <string>
#include <string_view>
#include <vector>

#include "slidesim/units.hpp"

namespace slidesim {

/// Transformer geometry. Counts are exact integers so that totals never
/// pick up floating point error.
struct ModelSpec {
  std::int64_t num_layers = 1;
  std::uint64_t params_per_layer = 0;
  std::int64_t hidden_size = 4096;
  std::int64_t vocab_size = 32000;
  std::uint64_t embedding_params = 0;
  std::uint64_t head_params = 0;
  // With tied embeddings the output head shares the embedding matrix, so
  // head_params is not counted separately.
  bool tied_embeddings = false;

  std::uint64_t total_params() const {
    const std::uint64_t layers =
        static_cast<std::uint64_t>(num_layers) * params_per_layer;
    return layers + embedding_params + (tied_embeddings ? 0 : head_params);
  }

  bool operator==(const ModelSpec&) const = default;
};

struct WorkloadShape {
  std::int64_t batch_size = 16;
  std::int64_t seq_len = 1024;
  std::int64_t bytes_low_precision = 2;
  std::int64_t bytes_full_precision = 4;

  std::int64_t tokens() const { return batch_size * seq_len; }

  bool operator==(const WorkloadShape&) const = default;
};

struct HardwareSpec {
  double gpu_flops = 165e12;
  double gpu_efficiency = 0.5;
  Bytes vram_bytes = 24'000'000'000ULL;
  Bytes pcie_h2d_bw = 25'000'000'000ULL;
  Bytes pcie_d2h_bw = 25'000'000'000ULL;
  double cpu_update_rate = 1.5e9;   // params/s through Layer-Adam
  double cpu_convert_rate = 4.0e9;  // params/s FP32 -> BF16
  Bytes ram_bytes = 256'000'000'000ULL;
  std::int64_t nvme_drives = 0;
  Bytes nvme_read_bw = 7'000'000'000ULL;   // per drive
  Bytes nvme_write_bw = 6'000'000'000ULL;  // per drive
  Bytes nvme_capacity_bytes = 0;           // total across drives; 0 = unbounded
  bool gds_enabled = false;

  double nvme_read_total() const {
    return static_cast<double>(nvme_drives) * static_cast<double>(nvme_read_bw);
  }
  double nvme_write_total() const {
    return static_cast<double>(nvme_drives) * static_cast<double>(nvme_write_bw);
  }

  bool operator==(const HardwareSpec&) const = default;
};

enum class ActivationTarget { kGpuResident, kCpu, kNvme };

inline std::string_view to_string(ActivationTarget t) {
  switch (t) {
    case ActivationTarget::kGpuResident:
      return "gpu_resident";
    case ActivationTarget::kCpu:
      return "cpu";
    case ActivationTarget::kNvme:
      return "nvme";
  }
  return "?";
}

inline std::optional<ActivationTarget> activation_target_from_string(std::string_view s) {
  if (s == "gpu_resident") return ActivationTarget::kGpuResident;
  if (s == "cpu") return ActivationTarget::kCpu;
  if (s == "nvme") return ActivationTarget::kNvme;
  return std::nullopt;
}

struct OffloadPolicy {
  std::int64_t window_units = 3;
  std::int64_t grad_buffer_depth = 2;
  std::int64_t convert_buffer_depth = 2;
  // Host staging slots for optimizer states streamed from NVMe.
  std::int64_t optimizer_staging_depth = 2;
  ActivationTarget activation_target = ActivationTarget::kCpu;
  double optimizer_offload_fraction = 0.0;
  bool master_params_on_nvme = false;
  bool lce_enabled = true;
  std::int64_t lce_chunk_rows = 1024;
  Bytes workspace_bytes = 1ULL << 30;

  bool uses_nvme() const {
    return activation_target == ActivationTarget::kNvme ||
           optimizer_offload_fraction > 0.0 || master_params_on_nvme;
  }

  bool operator==(const OffloadPolicy&) const = default;
};

struct ExperimentConfig {
  ModelSpec model;
  WorkloadShape workload;
  HardwareSpec hardware;
  OffloadPolicy policy;

  bool operator==(const ExperimentConfig&) const = default;
};

inline constexpr double kDefaultFfMultiplier = 8.0 / 3.0;

/// Parameters of one decoder layer: attention projections (4h^2), a gated
/// MLP (three h x ff*h matrices) and two norm vectors.
inline std::uint64_t derive_layer_params(std::int64_t hidden_size,
                                         double ff_multiplier = kDefaultFfMultiplier) {
  if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
  if (!(ff_multiplier > 0.0)) throw std::invalid_argument("ff_multiplier must be > 0");
  const auto h = static_cast<std::uint64_t>(hidden_size);
  const double hd = static_cast<double>(hidden_size);
  const auto mlp = static_cast<std::uint64_t>(std::llround(3.0 * ff_multiplier * hd * hd));
  return 4 * h * h + mlp + 2 * h;
}

enum class LayerKind { kEmbedding, kTransformer, kHead };

/// A unit that slides through the GPU window. Embedding and head are
/// pseudo-layers with their own parameter counts.
struct PseudoLayer {
  int index = 0;  // position in forward order
  LayerKind kind = LayerKind::kTransformer;
  std::uint64_t params = 0;
  // Parameters that take part in matmuls; an embedding lookup costs no FLOPs.
  std::uint64_t compute_params = 0;
};

/// Forward-ordered list of pseudo-layers. Pseudo-layers with zero
/// parameters are omitted; a tied head carries the shared matrix.
inline std::vector<PseudoLayer> pseudo_layers(const ModelSpec& m) {
  std::vector<PseudoLayer> out;
  int idx = 0;
  if (m.embedding_params > 0 && !m.tied_embeddings) {
    out.push_back({idx++, LayerKind::kEmbedding, m.embedding_params, 0});
  }
  for (std::int64_t i = 0; i < m.num_layers; ++i) {
    out.push_back({idx++, LayerKind::kTransformer, m.params_per_layer, m.params_per_layer});
  }
  const std::uint64_t head = m.tied_embeddings ? m.embedding_params : m.head_params;
  if (head > 0) out.push_back({idx++, LayerKind::kHead, head, head});
  return out;
}

inline std::uint64_t max_layer_params(const ModelSpec& m) {
  std::uint64_t best = 0;
  for (const auto& l : pseudo_layers(m)) best = std::max(best, l.params);
  return best;
}

/// Throws ValidationError naming the first violated invariant. Checks run in
/// a fixed order so the same document always reports the same violation.
inline void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  const auto& m = c.model;
  if (m.num_layers < 1) fail("model.num_layers ≥ 1");
  if (m.hidden_size < 1) fail("model.hidden_size ≥ 1");
  if (m.vocab_size < 1) fail("model.vocab_size ≥ 1");

  const auto& w = c.workload;
  if (w.batch_size < 1) fail("workload.batch_size ≥ 1");
  if (w.seq_len < 1) fail("workload.seq_len ≥ 1");
  if (w.bytes_low_precision != 2) fail("workload.bytes_low_precision must be 2");
  if (w.bytes_full_precision != 4) fail("workload.bytes_full_precision must be 4");

  const auto& h = c.hardware;
  if (!(h.gpu_flops > 0.0)) fail("hardware.gpu_flops > 0");
  if (!(h.gpu_efficiency > 0.0 && h.gpu_efficiency <= 1.0)) {
    fail("hardware.gpu_efficiency ∈ (0, 1]");
  }
  if (h.vram_bytes == 0) fail("hardware.vram_bytes > 0");
  if (h.pcie_h2d_bw == 0) fail("hardware.pcie_h2d_bw > 0");
  if (h.pcie_d2h_bw == 0) fail("hardware.pcie_d2h_bw > 0");
  if (!(h.cpu_update_rate > 0.0)) fail("hardware.cpu_update_rate > 0");
  if (!(h.cpu_convert_rate > 0.0)) fail("hardware.cpu_convert_rate > 0");
  if (h.ram_bytes == 0) fail("hardware.ram_bytes > 0");
  if (h.nvme_drives < 0) fail("hardware.nvme_drives ≥ 0");
  if (h.nvme_drives > 0 && (h.nvme_read_bw == 0 || h.nvme_write_bw == 0)) {
    fail("hardware.nvme_read_bw and nvme_write_bw > 0 when NVMe drives are present");
  }

  const auto& p = c.policy;
  if (p.window_units < 2) fail("policy.window_units ≥ 2");
  if (p.grad_buffer_depth < 1) fail("policy.grad_buffer_depth ≥ 1");
  if (p.convert_buffer_depth < 1) fail("policy.convert_buffer_depth ≥ 1");
  if (p.optimizer_staging_depth < 1) fail("policy.optimizer_staging_depth ≥ 1");
  if (!(p.optimizer_offload_fraction >= 0.0 && p.optimizer_offload_fraction <= 1.0)) {
    fail("policy.optimizer_offload_fraction ∈ [0, 1]");
  }
  if (p.lce_chunk_rows < 1) fail("policy.lce_chunk_rows ≥ 1");
  if (p.lce_chunk_rows > w.tokens()) fail("policy.lce_chunk_rows ≤ batch_size·seq_len");
  if (p.uses_nvme() && h.nvme_drives == 0) {
    fail("NVMe tier required by policy but hardware.nvme_drives = 0");
  }
}

}  // namespace slidesim
