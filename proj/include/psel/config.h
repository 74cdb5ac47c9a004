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

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "psel/approx.h"
#include "psel/nn.h"
#include "psel/party.h"
#include "psel/scheduler.h"
#include "psel/selection.h"

// Experiment configuration in an INI grammar: [section] headers and
// key = value lines; lines starting with ';' are comments. Unknown sections
// or keys are errors. docs/formats.md lists every key and its default.

namespace psel {

struct PathConfig {
  std::string model = "model.sfmt";
  std::string dataset = "dataset.sfds";
  std::string out = "out";

  bool operator==(const PathConfig&) const = default;
};

struct ExperimentConfig {
  SessionConfig session;
  TransportKind transport = TransportKind::kLoopback;
  TransformerConfig model;
  std::size_t data_count = 256;
  PhasePlan plan;
  std::size_t batch_size = 8;
  PipelineVariant variant = PipelineVariant::kPMT;
  TrainConfig train;
  AppraisalConfig appraisal;
  SchedulerConfig scheduler;
  int coalesce_window = 8;
  ComputeModel compute;
  // 0 means unlimited.
  std::uint64_t memory_cap = 0;
  PathConfig paths;

  // Checks every section, including the plan against the model and data
  // count.
  void validate() const;
  PipelineConfig pipeline() const;
  std::uint64_t effective_memory_cap() const {
    return memory_cap == 0 ? std::numeric_limits<std::uint64_t>::max() : memory_cap;
  }

  bool operator==(const ExperimentConfig&) const = default;
};

// Defaults: a two-layer, four-head, 64-wide target at sequence length 128,
// 256 examples, and a two-phase plan <1,1,2> then <2,2,16>.
ExperimentConfig default_config();

// Overlays `text` on the defaults. `source` names the input in errors.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::string& path);
// Effective configuration in the same grammar; parse_config of the result
// reproduces `cfg`.
std::string emit_config(const ExperimentConfig& cfg);

// "<l,w,d>:alpha" entries separated by whitespace.
std::string format_phases(const std::vector<Phase>& phases);
std::vector<Phase> parse_phases(std::string_view text);

}  // namespace psel
