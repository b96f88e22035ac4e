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
#include <string>
#include <unordered_map>
#include <vector>

#include "slidesim/desim/graph.hpp"

namespace slidesim::desim {

/// Checks a timeline against the graph it claims to schedule. Returns one
/// message per violation; an empty result means the schedule is sound.
///
/// Verified: every task runs exactly once for exactly its duration; no
/// resource is over-subscribed; dependencies finish before dependents start;
/// FIFO resources start tasks in issue order; pool usage stays within
/// [0, capacity] and every pool is balanced at the end.
inline std::vector<std::string> validate_timeline(const TaskGraph& g, const Timeline& tl) {
  std::vector<std::string> errors;
  const auto idx = g.index();

  std::vector<const TimelineEntry*> entry_of(g.tasks.size(), nullptr);
  Duration makespan{0};
  for (const auto& e : tl.entries) {
    auto it = idx.find(e.task);
    if (it == idx.end()) {
      errors.push_back("timeline has unknown task '" + e.task + "'");
      continue;
    }
    if (entry_of[it->second] != nullptr) errors.push_back("task '" + e.task + "' scheduled twice");
    entry_of[it->second] = &e;
    makespan = std::max(makespan, e.finish);
    const Task& t = g.tasks[it->second];
    if (e.finish - e.start != t.duration) {
      errors.push_back("task '" + e.task + "' runs for a different time than its duration");
    }
    if (e.start.count() < 0) errors.push_back("task '" + e.task + "' starts before zero");
  }
  for (std::size_t i = 0; i < g.tasks.size(); ++i) {
    if (entry_of[i] == nullptr) errors.push_back("task '" + g.tasks[i].id + "' never ran");
  }
  if (!errors.empty()) return errors;
  if (makespan != tl.makespan) errors.push_back("makespan does not match the last finish");

  // Dependencies.
  for (std::size_t i = 0; i < g.tasks.size(); ++i) {
    for (const auto& d : g.tasks[i].deps) {
      const auto* dep = entry_of[idx.at(d)];
      if (entry_of[i]->start < dep->finish) {
        errors.push_back("task '" + g.tasks[i].id + "' starts before dependency '" + d +
                         "' finishes");
      }
    }
  }

  // Resource occupancy: sweep each resource, finishes before starts at ties.
  for (const auto& r : g.resources) {
    std::vector<std::pair<Duration, int>> events;
    std::vector<std::size_t> issue_order;
    for (std::size_t i = 0; i < g.tasks.size(); ++i) {
      const auto& rs = g.tasks[i].resources;
      if (std::find(rs.begin(), rs.end(), r.id) == rs.end()) continue;
      issue_order.push_back(i);
      if (g.tasks[i].duration.count() == 0) continue;
      events.emplace_back(entry_of[i]->start, +1);
      events.emplace_back(entry_of[i]->finish, -1);
    }
    std::sort(events.begin(), events.end());
    int load = 0;
    for (const auto& [t, delta] : events) {
      load += delta;
      if (load > r.capacity) {
        errors.push_back("resource '" + r.id + "' over capacity at t=" + std::to_string(t.count()));
        break;
      }
    }
    if (r.fifo) {
      for (std::size_t k = 1; k < issue_order.size(); ++k) {
        if (entry_of[issue_order[k]]->start < entry_of[issue_order[k - 1]]->start) {
          errors.push_back("FIFO resource '" + r.id + "' started '" + g.tasks[issue_order[k]].id +
                           "' before '" + g.tasks[issue_order[k - 1]].id + "'");
        }
      }
    }
  }

  // Token replay.
  for (const auto& p : g.pools) {
    std::vector<std::pair<Duration, int>> events;  // (time, +1 release / -1 acquire)
    int acquired = 0;
    int released = 0;
    for (std::size_t i = 0; i < g.tasks.size(); ++i) {
      const Task& t = g.tasks[i];
      for (const auto& a : t.acquires) {
        if (a == p.id) {
          events.emplace_back(entry_of[i]->start, -1);
          ++acquired;
        }
      }
      for (const auto& rl : t.releases) {
        if (rl == p.id) {
          events.emplace_back(entry_of[i]->finish, +1);
          ++released;
        }
      }
    }
    // At equal times the engine's order is not recoverable from the
    // timeline alone, so each bound is checked under the ordering that is
    // most lenient for it.
    auto replay = [&](bool releases_first) {
      std::sort(events.begin(), events.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return releases_first ? a.second > b.second : a.second < b.second;
      });
      int available = p.tokens;
      for (const auto& [t, delta] : events) {
        available += delta;
        if (releases_first && available < 0) {
          errors.push_back("pool '" + p.id + "' overdrawn at t=" + std::to_string(t.count()));
          return;
        }
        if (!releases_first && available > p.tokens) {
          errors.push_back("pool '" + p.id + "' over-released at t=" + std::to_string(t.count()));
          return;
        }
      }
    };
    replay(true);
    replay(false);
    if (acquired != released) {
      errors.push_back("pool '" + p.id + "' unbalanced: " + std::to_string(acquired) +
                       " acquires vs " + std::to_string(released) + " releases");
    }
  }
  return errors;
}

/// Peak number of tokens of `pool` held at any instant.
inline int peak_tokens_in_use(const TaskGraph& g, const Timeline& tl, const std::string& pool) {
  std::unordered_map<std::string, const TimelineEntry*> at;
  for (const auto& e : tl.entries) at[e.task] = &e;
  std::vector<std::pair<Duration, int>> events;
  for (const auto& t : g.tasks) {
    const auto* e = at.at(t.id);
    for (const auto& a : t.acquires) {
      if (a == pool) events.emplace_back(e->start, +1);
    }
    for (const auto& r : t.releases) {
      if (r == pool) events.emplace_back(e->finish, -1);
    }
  }
  std::sort(events.begin(), events.end());  // -1 sorts before +1 at ties
  int in_use = 0;
  int peak = 0;
  for (const auto& [t, d] : events) {
    in_use += d;
    peak = std::max(peak, in_use);
  }
  return peak;
}

}  // namespace slidesim::desim
