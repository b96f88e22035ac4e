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
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slidesim/units.hpp"

namespace slidesim::desim {

enum class ResourceKind { kGpuCompute, kH2dChannel, kD2hChannel, kCpuUpdate, kCpuConvert, kNvmeChannel };

inline std::string_view to_string(ResourceKind k) {
  switch (k) {
    case ResourceKind::kGpuCompute:
      return "gpu_compute";
    case ResourceKind::kH2dChannel:
      return "h2d_channel";
    case ResourceKind::kD2hChannel:
      return "d2h_channel";
    case ResourceKind::kCpuUpdate:
      return "cpu_update";
    case ResourceKind::kCpuConvert:
      return "cpu_convert";
    case ResourceKind::kNvmeChannel:
      return "nvme_channel";
  }
  return "?";
}

/// A serially-shared executor. FIFO resources start their tasks in graph
/// order (stream semantics); the others pick by priority.
struct Resource {
  std::string id;
  ResourceKind kind = ResourceKind::kGpuCompute;
  int capacity = 1;
  bool fifo = false;
};

/// Counted tokens standing for pre-allocated buffers.
struct BufferPool {
  std::string id;
  int tokens = 1;
};

// Declaration order is dispatch priority: backward compute first, so that
// gradient drain never starves behind prefetch.
enum class Phase { kBwd = 0, kTransfer = 1, kNvmeIo = 2, kUpdate = 3, kFwd = 4 };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kBwd:
      return "bwd";
    case Phase::kTransfer:
      return "transfer";
    case Phase::kNvmeIo:
      return "nvme_io";
    case Phase::kUpdate:
      return "update";
    case Phase::kFwd:
      return "fwd";
  }
  return "?";
}

struct Task {
  std::string id;
  Duration duration{0};
  std::vector<std::string> resources;  // one slot held on each
  std::vector<std::string> acquires;   // tokens taken at start
  std::vector<std::string> releases;   // tokens returned at finish
  std::vector<std::string> deps;
  int layer = 0;
  Phase phase = Phase::kFwd;
  // What the task does ("bwd", "grad_d2h", "update", ...); used by metrics.
  std::string role;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tasks in issue order plus the resources and pools they refer to.
struct TaskGraph {
  std::vector<Task> tasks;
  std::vector<Resource> resources;
  std::vector<BufferPool> pools;

  Task& add(Task t) {
    tasks.push_back(std::move(t));
    return tasks.back();
  }

  const Task* find(std::string_view id) const {
    for (const auto& t : tasks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }

  Task* find(std::string_view id) {
    for (auto& t : tasks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }

  const Resource* resource(std::string_view id) const {
    for (const auto& r : resources) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  const BufferPool* pool(std::string_view id) const {
    for (const auto& p : pools) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

  std::unordered_map<std::string, std::size_t> index() const {
    std::unordered_map<std::string, std::size_t> idx;
    idx.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (!idx.emplace(tasks[i].id, i).second) {
        throw GraphError("duplicate task id '" + tasks[i].id + "'");
      }
    }
    return idx;
  }
};

struct TimelineEntry {
  std::string task;
  Duration start{0};
  Duration finish{0};
  std::string resource;  // first demanded resource, empty if none
};

struct Timeline {
  std::vector<TimelineEntry> entries;  // in start order
  Duration makespan{0};

  const TimelineEntry* find(std::string_view task) const {
    for (const auto& e : entries) {
      if (e.task == task) return &e;
    }
    return nullptr;
  }
};

}  // namespace slidesim::desim
