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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psel/transport.h"

// Operator DAGs over batched MPC work and a deterministic list scheduler
// that overlaps local compute with communication. All times are simulated.

namespace psel {

enum class NodeKind { kCompute, kComm };
enum class NodeClass { kLatencyBound, kBandwidthBound, kCompute };

std::string_view node_class_name(NodeClass c);

struct OpNode {
  int id = 0;
  NodeKind kind = NodeKind::kCompute;
  NodeClass cls = NodeClass::kCompute;
  std::string tag;
  int segment = 0;   // barrier-separated region of the run
  int batch = -1;    // -1 outside batch-parallel regions
  int position = 0;  // index within its chain
  std::uint64_t flops = 0;
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
  std::uint64_t transfer_bytes = 0;
  // Intermediate bytes live while the node's chain is in flight.
  std::uint64_t memory = 0;
  // Batches whose chains run through this node; several after coalescing.
  std::vector<int> members;
  std::vector<int> deps;

  bool operator==(const OpNode&) const = default;
};

struct Dag {
  std::vector<OpNode> nodes;  // ids equal indices

  std::size_t size() const { return nodes.size(); }
  std::uint64_t total_bytes() const;
  std::uint64_t total_rounds() const;
  // Throws kProtocol when a dependency cycle exists.
  std::vector<int> topological_order() const;
  bool operator==(const Dag&) const = default;
};

struct SchedulerConfig {
  // Comm nodes under this many bytes per round are latency-bound.
  std::uint64_t latency_threshold = 4096;

  bool operator==(const SchedulerConfig&) const = default;
};

// Each step becomes a compute node (when it has flops) followed by a comm
// node (when it has rounds), chained in order. Steps of batches >= 0 form one
// chain per batch; a run of batch -1 steps is a serial chain. Consecutive
// regions are separated by barriers.
Dag build_dag(std::span<const TraceStep> trace, const SchedulerConfig& cfg = {});
// `batches` independent copies of a per-batch op list: disjoint chains.
Dag replicate_dag(std::span<const TraceStep> per_batch, int batches, const SchedulerConfig& cfg = {});

// Merges latency-bound comm nodes at the same segment, position and tag
// across groups of up to `window` consecutive batches: rounds take the max,
// bytes add up. Each merged node waits for every member's predecessors and
// every member's successors wait for it. window = 1 is the identity.
Dag coalesce(const Dag& dag, int window);

struct ComputeModel {
  double flops_per_second = 1e9;  // per party

  void validate() const;
  bool operator==(const ComputeModel&) const = default;
};

struct Slot {
  std::string resource;
  double start = 0.0;
  double end = 0.0;
  int node = 0;
  std::string tag;
};

struct Timeline {
  std::vector<Slot> slots;  // in dispatch order
  double makespan = 0.0;
  double channel_busy = 0.0;
  double compute_busy = 0.0;
  std::uint64_t peak_memory = 0;

  double utilization(std::string_view resource) const;
  // One "resource start end node tag" line per slot.
  std::string trace_text() const;
};

double node_seconds(const OpNode& n, const NetworkModel& net, const ComputeModel& compute);

// List scheduling over three resources: the channel and each party's compute
// unit. A compute node occupies both compute units (the parties run the
// same local arithmetic). Ready nodes are dispatched first-in-first-out per
// resource in order of readiness. A chain is admitted at its first node only
// while the live memory of admitted chains stays within `memory_cap`; a
// chain's footprint is the largest `memory` among its nodes. Throws
// kResource when one chain alone exceeds the cap.
Timeline simulate(const Dag& dag, const NetworkModel& net, const ComputeModel& compute,
                  std::uint64_t memory_cap = std::numeric_limits<std::uint64_t>::max());

// Topological order with no overlap: makespan is the sum of node times.
Timeline sequential_baseline(const Dag& dag, const NetworkModel& net, const ComputeModel& compute);

}  // namespace psel
