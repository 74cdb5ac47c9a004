// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "psel/config.h"
#include "psel/proxy.h"

// Experiment driver behind the `psel` binary. Every command writes into the
// output directory and is byte-for-byte reproducible for a fixed config.
//
//   gen           model.sfmt, dataset.sfds, config.ini
//   train-approx  mlp/<l>-<w>-<d>/*.sfmt, train_report.json
//   select        indices.txt, report.json, ledger.txt, config.ini
//                 (+ timeline.txt for the "full" variant)
//   bench         bench.txt, bench.json
//   report        prints a summary of report.json

namespace psel {

// Model and dataset paths; relative entries resolve against paths.out.
std::string model_path(const ExperimentConfig& cfg);
std::string dataset_path(const ExperimentConfig& cfg);
std::string mlp_dir(const ExperimentConfig& cfg, const ProxySpec& spec);

// Distinct proxy specs of the plan, in plan order.
std::vector<ProxySpec> plan_specs(const PhasePlan& plan);

void cmd_gen(const ExperimentConfig& cfg, std::ostream& log);
void cmd_train_approx(const ExperimentConfig& cfg, std::ostream& log);
// With `compare`, also runs every other variant on the same inputs and adds
// a cost comparison to the report.
void cmd_select(const ExperimentConfig& cfg, bool compare, std::ostream& log);
void cmd_bench(const ExperimentConfig& cfg, std::ostream& log);
void cmd_report(const ExperimentConfig& cfg, std::ostream& log);

// Loads the proxies saved by train-approx; empty when any file is missing.
std::vector<ProxyModel> load_proxies(const ExperimentConfig& cfg, const TransformerWeights& target);

// Full command line; returns the process exit code. Errors print
// "psel: <category>: <message>" to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psel
