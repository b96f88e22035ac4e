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

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "slidesim/cli.hpp"

using slidesim::cli::Command;
using slidesim::cli::Format;
using slidesim::cli::Verb;

int main(int argc, char** argv) {
  CLI::App app{"slidesim: offloaded fine-tuning step simulator"};
  app.require_subcommand(1);

  Command cmd;
  std::string format = "table";
  auto common = [&](CLI::App* sub) {
    sub->add_option("config", cmd.config_path, "Experiment config (JSON, // comments allowed)")->required();
    sub->add_option("--set", cmd.overrides, "Override a key, e.g. policy.window_units=4");
    sub->add_option("--out", cmd.output_dir, "Output directory");
    sub->add_option("--name", cmd.name, "Output file stem (default: config file stem)");
    sub->add_option("--format", format, "Stdout format")->check(CLI::IsMember({"csv", "table"}));
  };

  const std::map<std::string, Verb> verbs{{"estimate", Verb::kEstimate},
                                          {"simulate", Verb::kSimulate},
                                          {"sweep", Verb::kSweep},
                                          {"max-model", Verb::kMaxModel},
                                          {"trace", Verb::kTrace}};
  std::map<CLI::App*, Verb> sub_verb;
  auto* estimate = app.add_subcommand("estimate", "Footprint and closed-form timings");
  auto* simulate = app.add_subcommand("simulate", "Simulate one step: metrics CSV and trace");
  auto* sweep = app.add_subcommand("sweep", "Simulate a step over an axis of values");
  auto* max_model = app.add_subcommand("max-model", "Largest trainable model per offload policy");
  auto* trace = app.add_subcommand("trace", "Simulate one step and write its trace only");
  for (auto* s : {estimate, simulate, sweep, max_model, trace}) {
    common(s);
    sub_verb[s] = verbs.at(s->get_name());
  }
  sweep->add_option("--axis", cmd.axis, "batch=..|model_size=..|nvme_drives=..|policy=..")->required();
  sweep->add_flag("--baselines", cmd.baselines, "Also run the sync_update and no_offload schedules");
  sweep->add_option("--jobs", cmd.jobs, "Concurrent sweep points (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : slidesim::cli::kExitInvalid;
  }
  for (const auto& [s, v] : sub_verb) {
    if (s->parsed()) cmd.verb = v;
  }
  cmd.format = format == "csv" ? Format::kCsv : Format::kTable;
  return slidesim::cli::run(cmd, std::cout, std::cerr);
}
