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

#include <string>

#include "slidesim/desim/builders.hpp"
#include "slidesim/desim/graph.hpp"

namespace slidesim::testing {

inline Duration ms(std::int64_t v) { return std::chrono::milliseconds(v); }

/// The two-layer hand instance: backward 10 ms, gradient copy 2 ms and
/// update 3 ms per layer, with instantaneous parameter and activation
/// prefetch. Hand schedule: 25 ms sliding, 28 ms with a synchronous update
/// stage, 20 ms compute only.
inline desim::TaskGraph tiny_backward_graph() {
  using namespace desim;
  TaskGraph g;
  g.resources = {{kGpu, ResourceKind::kGpuCompute, 1, false},
                 {kH2d, ResourceKind::kH2dChannel, 1, true},
                 {kD2h, ResourceKind::kD2hChannel, 1, true},
                 {kCpuUpdate, ResourceKind::kCpuUpdate, 1, false}};
  g.pools = {{kCacheUnits, 2}, {kGradBuffers, 2}};
  std::string prev_bwd;
  for (int layer : {2, 1}) {
    const std::string L = ".L" + std::to_string(layer);
    g.add({"h2d_b" + L, ms(0), {kH2d}, {kCacheUnits}, {}, {}, layer, Phase::kTransfer, "h2d_params"});
    g.add({"act_prefetch" + L, ms(0), {kH2d}, {}, {}, {"h2d_b" + L}, layer, Phase::kTransfer, "act_prefetch"});
    Task bwd{"bwd" + L, ms(10), {kGpu}, {}, {}, {"h2d_b" + L, "act_prefetch" + L}, layer, Phase::kBwd, "bwd"};
    if (!prev_bwd.empty()) bwd.deps.push_back(prev_bwd);
    g.add(bwd);
    g.add({"grad_d2h" + L, ms(2), {kD2h}, {kGradBuffers}, {kCacheUnits}, {"bwd" + L}, layer,
           Phase::kTransfer, "grad_d2h"});
    g.add({"update" + L, ms(3), {kCpuUpdate}, {}, {kGradBuffers}, {"grad_d2h" + L}, layer,
           Phase::kUpdate, "update"});
    prev_bwd = "bwd" + L;
  }
  return g;
}

}  // namespace slidesim::testing
