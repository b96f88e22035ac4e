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
#include <cstdint>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "slidesim/desim/graph.hpp"

namespace slidesim::desim {

/// Raised when no task can start, none is running, and work remains.
class DeadlockError : public GraphError {
 public:
  DeadlockError(const std::string& what, std::vector<std::string> waiting)
      : GraphError(what), waiting_(std::move(waiting)) {}
  const std::vector<std::string>& waiting() const { return waiting_; }

 private:
  std::vector<std::string> waiting_;
};

namespace engine_detail {

struct Compiled {
  std::vector<std::vector<std::size_t>> deps;
  std::vector<std::vector<std::size_t>> dependents;
  std::vector<std::vector<std::size_t>> res;
  std::vector<std::vector<std::size_t>> acq;
  std::vector<std::vector<std::size_t>> rel;
  std::vector<int> capacity;
  std::vector<bool> fifo;
  std::vector<int> pool_capacity;
  // fifo_queue[r] lists the tasks using FIFO resource r in issue order.
  std::vector<std::vector<std::size_t>> fifo_queue;
};

inline Compiled compile(const TaskGraph& g, std::span<const Resource> resources,
                        std::span<const BufferPool> pools) {
  Compiled c;
  const auto idx = g.index();
  std::unordered_map<std::string, std::size_t> ridx;
  for (std::size_t i = 0; i < resources.size(); ++i) {
    if (resources[i].capacity < 1) {
      throw GraphError("resource '" + resources[i].id + "' capacity must be ≥ 1");
    }
    if (!ridx.emplace(resources[i].id, i).second) {
      throw GraphError("duplicate resource '" + resources[i].id + "'");
    }
    c.capacity.push_back(resources[i].capacity);
    c.fifo.push_back(resources[i].fifo);
  }
  std::unordered_map<std::string, std::size_t> pidx;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (pools[i].tokens < 0) throw GraphError("pool '" + pools[i].id + "' has negative size");
    if (!pidx.emplace(pools[i].id, i).second) {
      throw GraphError("duplicate pool '" + pools[i].id + "'");
    }
    c.pool_capacity.push_back(pools[i].tokens);
  }

  const std::size_t n = g.tasks.size();
  c.deps.resize(n);
  c.dependents.resize(n);
  c.res.resize(n);
  c.acq.resize(n);
  c.rel.resize(n);
  c.fifo_queue.resize(resources.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Task& t = g.tasks[i];
    if (t.duration.count() < 0) throw GraphError("task '" + t.id + "' has negative duration");
    for (const auto& d : t.deps) {
      auto it = idx.find(d);
      if (it == idx.end()) throw GraphError("task '" + t.id + "' depends on unknown '" + d + "'");
      c.deps[i].push_back(it->second);
      c.dependents[it->second].push_back(i);
    }
    for (const auto& r : t.resources) {
      auto it = ridx.find(r);
      if (it == ridx.end()) throw GraphError("task '" + t.id + "' uses undeclared resource '" + r + "'");
      if (std::find(c.res[i].begin(), c.res[i].end(), it->second) != c.res[i].end()) {
        throw GraphError("task '" + t.id + "' demands resource '" + r + "' twice");
      }
      c.res[i].push_back(it->second);
      if (c.fifo[it->second]) {
        c.fifo_queue[it->second].push_back(i);
      }
    }
    auto pools_of = [&](const std::vector<std::string>& names, std::vector<std::size_t>& out) {
      for (const auto& p : names) {
        auto it = pidx.find(p);
        if (it == pidx.end()) throw GraphError("task '" + t.id + "' uses undeclared pool '" + p + "'");
        out.push_back(it->second);
      }
    };
    pools_of(t.acquires, c.acq[i]);
    pools_of(t.releases, c.rel[i]);
  }

  // Kahn's algorithm for cycle detection.
  std::vector<std::size_t> indeg(n);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    indeg[i] = c.deps[i].size();
    if (indeg[i] == 0) stack.push_back(i);
  }
  std::size_t seen = 0;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    ++seen;
    for (auto j : c.dependents[i]) {
      if (--indeg[j] == 0) stack.push_back(j);
    }
  }
  if (seen != n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (indeg[i] > 0) throw GraphError("dependency cycle through task '" + g.tasks[i].id + "'");
    }
  }
  return c;
}

/// Static dispatch order: phase, then layer (ascending in the forward pass,
/// descending elsewhere), then task id.
struct PriorityLess {
  const std::vector<Task>* tasks;
  bool operator()(std::size_t a, std::size_t b) const {
    const Task& x = (*tasks)[a];
    const Task& y = (*tasks)[b];
    auto key = [](const Task& t) {
      const int layer_key = t.phase == Phase::kFwd ? t.layer : -t.layer;
      return std::make_tuple(static_cast<int>(t.phase), layer_key);
    };
    const auto kx = key(x);
    const auto ky = key(y);
    if (kx != ky) return kx < ky;
    if (x.id != y.id) return x.id < y.id;
    return a < b;
  }
};

}  // namespace engine_detail

/// Event-driven list scheduling of `graph` on the given resources and pools.
///
/// A task is ready once all its dependencies have finished. At every event
/// time the engine repeatedly starts the highest-priority ready task that
/// can take all of its resource slots and pool tokens (and is at the head of
/// every FIFO resource it uses), until none can. Resources and tokens taken
/// at start are returned at finish. The result is a pure function of the
/// inputs.
inline Timeline simulate(const TaskGraph& graph, std::span<const Resource> resources,
                         std::span<const BufferPool> pools) {
  using namespace engine_detail;
  const Compiled c = compile(graph, resources, pools);
  const std::size_t n = graph.tasks.size();

  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = c.deps[i].size();
  std::set<std::size_t, PriorityLess> ready(PriorityLess{&graph.tasks});
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.insert(i);
  }

  std::vector<int> busy(resources.size(), 0);
  std::vector<int> tokens = c.pool_capacity;
  std::vector<std::size_t> fifo_head(resources.size(), 0);

  using Event = std::tuple<Duration, std::uint64_t, std::size_t>;  // finish, seq, task
  std::priority_queue<Event, std::vector<Event>, std::greater<>> running;
  std::uint64_t seq = 0;

  Timeline tl;
  tl.entries.reserve(n);
  Duration now{0};
  std::size_t finished = 0;

  auto can_start = [&](std::size_t i) {
    for (auto r : c.res[i]) {
      if (busy[r] >= c.capacity[r]) return false;
      if (c.fifo[r] && c.fifo_queue[r][fifo_head[r]] != i) return false;
    }
    // A task may take several tokens from one pool.
    for (auto p : c.acq[i]) {
      const auto need = std::count(c.acq[i].begin(), c.acq[i].end(), p);
      if (tokens[p] < need) return false;
    }
    return true;
  };

  while (finished < n) {
    bool started = true;
    while (started) {
      started = false;
      for (auto it = ready.begin(); it != ready.end(); ++it) {
        const std::size_t i = *it;
        if (!can_start(i)) continue;
        ready.erase(it);
        for (auto r : c.res[i]) {
          ++busy[r];
          if (c.fifo[r]) ++fifo_head[r];
        }
        for (auto p : c.acq[i]) --tokens[p];
        const Task& t = graph.tasks[i];
        const Duration end = now + t.duration;
        tl.entries.push_back({t.id, now, end, t.resources.empty() ? std::string() : t.resources.front()});
        running.emplace(end, seq++, i);
        started = true;
        break;
      }
    }

    if (running.empty()) {
      std::vector<std::string> waiting;
      for (auto i : ready) waiting.push_back(graph.tasks[i].id);
      std::string msg = "deadlock at t=" + std::to_string(now.count()) + "ns; waiting:";
      for (const auto& w : waiting) msg += " " + w;
      throw DeadlockError(msg, std::move(waiting));
    }

    now = std::get<0>(running.top());
    while (!running.empty() && std::get<0>(running.top()) == now) {
      const std::size_t i = std::get<2>(running.top());
      running.pop();
      ++finished;
      for (auto r : c.res[i]) --busy[r];
      for (auto p : c.rel[i]) {
        if (++tokens[p] > c.pool_capacity[p]) {
          throw GraphError("task '" + graph.tasks[i].id + "' over-releases pool '" +
                           std::string(pools[p].id) + "'");
        }
      }
      for (auto j : c.dependents[i]) {
        if (--pending[j] == 0) ready.insert(j);
      }
    }
    tl.makespan = std::max(tl.makespan, now);
  }
  return tl;
}

inline Timeline simulate(const TaskGraph& graph) {
  return simulate(graph, graph.resources, graph.pools);
}

}  // namespace slidesim::desim
