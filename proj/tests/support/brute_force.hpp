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
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "slidesim/desim/graph.hpp"

namespace slidesim::testing {

/// Exhaustive reference scheduler, written without reference to the engine.
///
/// Event semantics: at each event time a dispatch round starts tasks until
/// none can start; then every running task with the earliest finish
/// completes, releasing its resources and tokens, and time advances to that
/// finish. Within a round, each started task must belong to the best
/// priority class among the tasks startable at that moment (phase, then
/// layer ascending in the forward phase and descending elsewhere). Ties
/// inside a class are branched on instead of broken by id.
class BruteForce {
 public:
  explicit BruteForce(const desim::TaskGraph& g) : g_(g) {
    for (std::size_t i = 0; i < g.tasks.size(); ++i) id_[g.tasks[i].id] = i;
  }

  struct Result {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    std::int64_t worst = -1;
    std::size_t leaves = 0;
    std::size_t deadlocks = 0;
  };

  Result run() {
    Result r;
    State s{0, std::vector<std::int64_t>(g_.tasks.size(), -1), std::vector<bool>(g_.tasks.size(), false)};
    explore(s, r);
    return r;
  }

 private:
  struct State {
    std::int64_t now;
    std::vector<std::int64_t> start;  // -1 until started
    std::vector<bool> completed;
  };

  std::int64_t finish(const State& s, std::size_t i) const {
    return s.start[i] + g_.tasks[i].duration.count();
  }

  bool startable(const State& s, std::size_t i) const {
    const auto& task = g_.tasks[i];
    if (s.start[i] >= 0) return false;
    for (const auto& d : task.deps) {
      if (!s.completed[id_.at(d)]) return false;
    }
    for (const auto& res : task.resources) {
      const auto* decl = g_.resource(res);
      int busy = 0;
      for (std::size_t j = 0; j < g_.tasks.size(); ++j) {
        if (s.start[j] < 0 || s.completed[j]) continue;
        const auto& rs = g_.tasks[j].resources;
        busy += std::count(rs.begin(), rs.end(), res) > 0;
      }
      if (busy >= decl->capacity) return false;
      if (decl->fifo) {
        for (std::size_t j = 0; j < i; ++j) {
          const auto& rs = g_.tasks[j].resources;
          if (s.start[j] < 0 && std::find(rs.begin(), rs.end(), res) != rs.end()) return false;
        }
      }
    }
    std::map<std::string, int> need;
    for (const auto& p : task.acquires) ++need[p];
    for (const auto& [pool, k] : need) {
      int avail = g_.pool(pool)->tokens;
      for (std::size_t j = 0; j < g_.tasks.size(); ++j) {
        if (s.start[j] >= 0) avail -= static_cast<int>(std::count(g_.tasks[j].acquires.begin(), g_.tasks[j].acquires.end(), pool));
        if (s.completed[j]) avail += static_cast<int>(std::count(g_.tasks[j].releases.begin(), g_.tasks[j].releases.end(), pool));
      }
      if (avail < k) return false;
    }
    return true;
  }

  std::tuple<int, int> klass(std::size_t i) const {
    const auto& t = g_.tasks[i];
    return {static_cast<int>(t.phase), t.phase == desim::Phase::kFwd ? t.layer : -t.layer};
  }

  void explore(State& s, Result& r) {
    const std::size_t n = g_.tasks.size();
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i) {
      if (startable(s, i)) cand.push_back(i);
    }
    if (!cand.empty()) {
      std::tuple<int, int> best = klass(cand.front());
      for (auto i : cand) best = std::min(best, klass(i));
      for (auto i : cand) {
        if (klass(i) != best) continue;
        s.start[i] = s.now;
        explore(s, r);
        s.start[i] = -1;
      }
      return;
    }
    std::int64_t next = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < n; ++i) {
      if (s.start[i] >= 0 && !s.completed[i]) next = std::min(next, finish(s, i));
    }
    if (next == std::numeric_limits<std::int64_t>::max()) {
      const bool all = std::all_of(s.completed.begin(), s.completed.end(), [](bool b) { return b; });
      if (!all) {
        ++r.deadlocks;
        return;
      }
      ++r.leaves;
      std::int64_t makespan = 0;
      for (std::size_t i = 0; i < n; ++i) makespan = std::max(makespan, finish(s, i));
      r.best = std::min(r.best, makespan);
      r.worst = std::max(r.worst, makespan);
      return;
    }
    State after = s;
    after.now = next;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.start[i] >= 0 && !s.completed[i] && finish(s, i) == next) after.completed[i] = true;
    }
    explore(after, r);
  }

  const desim::TaskGraph& g_;
  std::map<std::string, std::size_t> id_;
};

}  // namespace slidesim::testing
