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

#include "psel/scheduler.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "psel/error.h"

namespace psel {

std::string_view node_class_name(NodeClass c) {
  switch (c) {
    case NodeClass::kLatencyBound:
      return "latency_bound";
    case NodeClass::kBandwidthBound:
      return "bandwidth_bound";
    case NodeClass::kCompute:
      return "compute";
  }
  return "?";
}

std::uint64_t Dag::total_bytes() const {
  std::uint64_t s = 0;
  for (const auto& n : nodes) s += n.bytes;
  return s;
}

std::uint64_t Dag::total_rounds() const {
  std::uint64_t s = 0;
  for (const auto& n : nodes) s += n.rounds;
  return s;
}

std::vector<int> Dag::topological_order() const {
  const std::size_t n = nodes.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const auto& node : nodes) {
    for (int d : node.deps) {
      PSEL_ENFORCE(d >= 0 && static_cast<std::size_t>(d) < n, kShape, "node " << node.id << " depends on " << d);
      succ[d].push_back(node.id);
      ++indegree[node.id];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int s : succ[v]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  PSEL_ENFORCE(order.size() == n, kProtocol, "operator graph has a cycle");
  return order;
}

// ---------------------------------------------------------------------------

namespace {

NodeClass classify(std::uint64_t rounds, std::uint64_t bytes, const SchedulerConfig& cfg) {
  return bytes < cfg.latency_threshold * rounds ? NodeClass::kLatencyBound : NodeClass::kBandwidthBound;
}

// Per-chain footprint: the largest node memory among the chain's nodes.
void assign_footprints(Dag& dag) {
  std::map<std::pair<int, int>, std::uint64_t> peak;
  for (const auto& n : dag.nodes) {
    for (int b : n.members) {
      auto& v = peak[{n.segment, b}];
      v = std::max(v, n.memory);
    }
  }
  for (auto& n : dag.nodes) {
    std::uint64_t m = 0;
    for (int b : n.members) m = std::max(m, peak[{n.segment, b}]);
    n.memory = m;
  }
}

}  // namespace

Dag build_dag(std::span<const TraceStep> trace, const SchedulerConfig& cfg) {
  Dag dag;
  std::vector<int> barrier;           // tails of the previous segment
  std::map<int, int> tails;           // batch -> last node in this segment
  std::map<int, int> positions;       // batch -> next position
  int segment = -1;
  int stage = 0;
  bool parallel = false;

  auto close_segment = [&]() {
    if (tails.empty()) return;
    barrier.clear();
    for (const auto& [b, id] : tails) barrier.push_back(id);
    tails.clear();
    positions.clear();
  };
  auto add = [&](OpNode node, int batch) {
    node.id = static_cast<int>(dag.nodes.size());
    node.segment = segment;
    node.batch = batch;
    node.members = {batch};
    node.position = positions[batch]++;
    const auto it = tails.find(batch);
    if (it != tails.end()) {
      node.deps = {it->second};
    } else {
      node.deps = barrier;
    }
    tails[batch] = node.id;
    dag.nodes.push_back(std::move(node));
  };

  for (const TraceStep& s : trace) {
    const bool par = s.batch >= 0;
    if (segment < 0 || s.stage != stage || par != parallel) {
      close_segment();
      ++segment;
      stage = s.stage;
      parallel = par;
    }
    if (s.flops > 0) {
      OpNode c;
      c.kind = NodeKind::kCompute;
      c.cls = NodeClass::kCompute;
      c.tag = s.tag;
      c.flops = s.flops;
      add(std::move(c), s.batch);
    }
    if (s.rounds > 0) {
      OpNode m;
      m.kind = NodeKind::kComm;
      m.cls = classify(s.rounds, s.bytes, cfg);
      m.tag = s.tag;
      m.rounds = s.rounds;
      m.bytes = s.bytes;
      m.transfer_bytes = s.transfer_bytes;
      m.memory = s.bytes;
      add(std::move(m), s.batch);
    }
  }
  assign_footprints(dag);
  return dag;
}

Dag replicate_dag(std::span<const TraceStep> per_batch, int batches, const SchedulerConfig& cfg) {
  PSEL_ENFORCE(batches >= 1, kConfig, "need at least one batch");
  std::vector<TraceStep> trace;
  for (int b = 0; b < batches; ++b) {
    for (TraceStep s : per_batch) {
      s.stage = 0;
      s.batch = b;
      trace.push_back(std::move(s));
    }
  }
  return build_dag(trace, cfg);
}

Dag coalesce(const Dag& dag, int window) {
  PSEL_ENFORCE(window >= 1, kConfig, "coalescing window must be at least 1, got " << window);
  if (window == 1) return dag;
  const std::size_t n = dag.nodes.size();
  // Group key: segment, position, tag, batch group.
  std::map<std::tuple<int, int, std::string, int>, std::vector<int>> groups;
  for (const auto& node : dag.nodes) {
    if (node.kind != NodeKind::kComm || node.cls != NodeClass::kLatencyBound || node.batch < 0) continue;
    groups[{node.segment, node.position, node.tag, node.batch / window}].push_back(node.id);
  }
  std::vector<int> rep(n);
  for (std::size_t i = 0; i < n; ++i) rep[i] = static_cast<int>(i);
  for (const auto& [key, ids] : groups) {
    for (int id : ids) rep[id] = ids.front();
  }

  // Merged graph on representatives, still indexed by old ids.
  std::vector<OpNode> merged(n);
  std::vector<bool> live(n, false);
  for (const auto& node : dag.nodes) {
    const int r = rep[node.id];
    OpNode& m = merged[r];
    if (!live[r]) {
      m = node;
      m.deps.clear();
      m.members.clear();
      m.rounds = m.bytes = m.transfer_bytes = 0;
      live[r] = true;
    }
    m.rounds = std::max(m.rounds, node.rounds);
    m.bytes += node.bytes;
    m.transfer_bytes += node.transfer_bytes;
    m.members.insert(m.members.end(), node.members.begin(), node.members.end());
    for (int d : node.deps) {
      if (rep[d] != r) m.deps.push_back(rep[d]);
    }
  }

  // Renumber in topological order of the merged graph.
  Dag tmp;
  std::vector<int> old_of;
  std::vector<int> new_of(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!live[i]) continue;
    new_of[i] = static_cast<int>(old_of.size());
    old_of.push_back(static_cast<int>(i));
  }
  for (int old : old_of) {
    OpNode m = merged[old];
    m.id = new_of[old];
    for (int& d : m.deps) d = new_of[d];
    std::sort(m.deps.begin(), m.deps.end());
    m.deps.erase(std::unique(m.deps.begin(), m.deps.end()), m.deps.end());
    std::sort(m.members.begin(), m.members.end());
    tmp.nodes.push_back(std::move(m));
  }
  const std::vector<int> order = tmp.topological_order();
  std::vector<int> rank(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  Dag out;
  out.nodes.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    OpNode m = tmp.nodes[order[i]];
    m.id = static_cast<int>(i);
    for (int& d : m.deps) d = rank[d];
    std::sort(m.deps.begin(), m.deps.end());
    out.nodes[i] = std::move(m);
  }
  return out;
}

// ---------------------------------------------------------------------------

void ComputeModel::validate() const {
  PSEL_ENFORCE(std::isfinite(flops_per_second) && flops_per_second > 0.0, kConfig,
               "compute rate must be positive, got " << flops_per_second);
}

double Timeline::utilization(std::string_view resource) const {
  if (makespan <= 0.0) return 0.0;
  double busy = 0.0;
  for (const auto& s : slots) {
    if (s.resource == resource) busy += s.end - s.start;
  }
  return busy / makespan;
}

std::string Timeline::trace_text() const {
  std::ostringstream os;
  os.precision(9);
  for (const auto& s : slots) {
    os << s.resource << ' ' << std::fixed << s.start << ' ' << s.end << ' ' << s.node << ' ' << s.tag << '\n';
  }
  return os.str();
}

double node_seconds(const OpNode& n, const NetworkModel& net, const ComputeModel& compute) {
  if (n.kind == NodeKind::kComm) return simulated_time(n.rounds, n.transfer_bytes, net);
  return static_cast<double>(n.flops) / compute.flops_per_second;
}

namespace {

void emit(Timeline& t, const OpNode& n, double start, double end) {
  if (n.kind == NodeKind::kComm) {
    t.slots.push_back({"channel", start, end, n.id, n.tag});
    t.channel_busy += end - start;
  } else {
    t.slots.push_back({"compute0", start, end, n.id, n.tag});
    t.slots.push_back({"compute1", start, end, n.id, n.tag});
    t.compute_busy += end - start;
  }
  t.makespan = std::max(t.makespan, end);
}

}  // namespace

Timeline simulate(const Dag& dag, const NetworkModel& net, const ComputeModel& compute, std::uint64_t memory_cap) {
  net.validate();
  compute.validate();
  dag.topological_order();
  const std::size_t n = dag.nodes.size();

  // Chain extents and footprints, keyed by (segment, batch).
  using Chain = std::pair<int, int>;
  std::map<Chain, int> last_position;
  std::map<Chain, std::uint64_t> footprint;
  for (const auto& node : dag.nodes) {
    for (int b : node.members) {
      const Chain c{node.segment, b};
      last_position[c] = std::max(last_position[c], node.position);
      footprint[c] = std::max(footprint[c], node.memory);
    }
  }
  for (const auto& [c, m] : footprint) {
    PSEL_ENFORCE(m <= memory_cap, kResource,
                 "a chain needs " << m << " live bytes but the memory cap is " << memory_cap);
  }

  std::vector<int> pending(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const auto& node : dag.nodes) {
    for (int d : node.deps) {
      succ[d].push_back(node.id);
      ++pending[node.id];
    }
  }
  // Ready queues ordered by (ready time, id): 0 = channel, 1 = compute.
  using Entry = std::pair<double, int>;
  std::array<std::set<Entry>, 2> ready;
  auto resource_of = [&](int id) { return dag.nodes[id].kind == NodeKind::kComm ? 0 : 1; };
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready[resource_of(static_cast<int>(i))].insert({0.0, static_cast<int>(i)});
  }

  std::set<Chain> admitted;
  std::uint64_t live = 0;
  std::array<bool, 2> busy{false, false};
  // Completion events ordered by (end time, id).
  std::set<Entry> running;
  std::vector<double> ready_at(n, 0.0);
  Timeline t;
  double now = 0.0;
  std::size_t done = 0;

  auto needs = [&](const OpNode& node) {
    std::uint64_t extra = 0;
    for (int b : node.members) {
      const Chain c{node.segment, b};
      if (!admitted.count(c)) extra += footprint[c];
    }
    return extra;
  };

  while (done < n) {
    for (int r = 0; r < 2; ++r) {
      if (busy[r]) continue;
      for (auto it = ready[r].begin(); it != ready[r].end(); ++it) {
        const OpNode& node = dag.nodes[it->second];
        const std::uint64_t extra = needs(node);
        if (extra > 0 && live + extra > memory_cap) continue;
        for (int b : node.members) admitted.insert({node.segment, b});
        live += extra;
        t.peak_memory = std::max(t.peak_memory, live);
        const double end = now + node_seconds(node, net, compute);
        emit(t, node, now, end);
        running.insert({end, node.id});
        busy[r] = true;
        ready[r].erase(it);
        break;
      }
    }
    PSEL_ENFORCE(!running.empty(), kResource, "scheduler stalled with " << n - done << " nodes left");
    // Advance to the next completion and retire everything ending then.
    now = running.begin()->first;
    while (!running.empty() && running.begin()->first <= now) {
      const int id = running.begin()->second;
      running.erase(running.begin());
      const OpNode& node = dag.nodes[id];
      busy[resource_of(id)] = false;
      ++done;
      for (int b : node.members) {
        const Chain c{node.segment, b};
        if (node.position == last_position[c] && admitted.count(c)) {
          live -= footprint[c];
          admitted.erase(c);
        }
      }
      for (int s : succ[id]) {
        ready_at[s] = std::max(ready_at[s], now);
        if (--pending[s] == 0) ready[resource_of(s)].insert({ready_at[s], s});
      }
    }
  }
  return t;
}

Timeline sequential_baseline(const Dag& dag, const NetworkModel& net, const ComputeModel& compute) {
  net.validate();
  compute.validate();
  Timeline t;
  double now = 0.0;
  for (int id : dag.topological_order()) {
    const OpNode& node = dag.nodes[id];
    const double end = now + node_seconds(node, net, compute);
    emit(t, node, now, end);
    t.peak_memory = std::max(t.peak_memory, node.memory);
    now = end;
  }
  t.makespan = now;
  return t;
}

}  // namespace psel
