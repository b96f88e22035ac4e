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

#include "slidesim/units.hpp"
#include "slidesim/workload.hpp"
#include "slidesim/config_io.hpp"
#include "slidesim/footprint.hpp"
#include "slidesim/costmodel.hpp"
#include "slidesim/desim/graph.hpp"
#include "slidesim/desim/engine.hpp"
#include "slidesim/desim/validate.hpp"
#include "slidesim/desim/builders.hpp"
#include "slidesim/desim/measure.hpp"
#include "slidesim/report.hpp"
