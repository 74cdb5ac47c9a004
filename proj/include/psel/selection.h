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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psel/approx.h"
#include "psel/nn.h"
#include "psel/party.h"
#include "psel/prng.h"
#include "psel/proxy.h"
#include "psel/shares.h"

// Multi-phase private selection: each phase ranks the surviving candidates
// by proxy entropy under MPC and keeps the top fraction. Only comparison
// bits, the final indices and the appraisal output are ever opened.

namespace psel {

// Uniform sample without replacement of round(fraction * population)
// indices, returned ascending. fraction must lie in (0, 1].
std::vector<std::size_t> bootstrap_sample(std::size_t population, double fraction, CounterPrng& rng);
// `count` distinct indices below `population`, ascending.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, CounterPrng& rng);

// round-half-up(alpha * n), at least 1.
std::size_t keep_count(double alpha, std::size_t n);

struct QuickSelectStats {
  std::size_t comparisons = 0;  // scalar comparisons opened
  std::size_t passes = 0;       // partition passes, one batched comparison each

  bool operator==(const QuickSelectStats&) const = default;
};

// Positions of the k largest values (ascending). Order is value descending,
// then position ascending, so equal values resolve to the lower position.
// Each pass compares every remaining candidate against a pivot drawn from
// `pivots` in one batched compare_open.
std::vector<std::size_t> secure_quickselect_topk(Party& p, const SharedTensor& values, std::size_t k,
                                                 CounterPrng& pivots, QuickSelectStats* stats = nullptr);

// Plaintext counterpart ranking by the same total order.
std::vector<std::size_t> plain_topk(std::span<const std::int64_t> values, std::size_t k);

struct Phase {
  ProxySpec spec;
  double selectivity = 0.5;

  bool operator==(const Phase&) const = default;
};

struct PhasePlan {
  std::vector<Phase> phases;
  std::size_t budget = 0;
  double bootstrap_fraction = 0.05;

  std::size_t bootstrap_count() const;
  // |S_0| .. |S_N| for `candidates` starting candidates.
  std::vector<std::size_t> sizes(std::size_t candidates) const;
  // Selectivities in (0, 1), specs non-decreasing in every component, each
  // spec valid for the target, and |S_N| within one per phase of
  // budget - bootstrap_count.
  void validate(const TransformerConfig& target, std::size_t dataset_size) const;
  // Single phase with the last spec keeping the plan's final count.
  PhasePlan collapsed(std::size_t candidates) const;

  bool operator==(const PhasePlan&) const = default;
};

// Supplies secret-shared entropies for dataset indices `ids` in a phase.
// Each party holds its own instance; calls are made in lockstep.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual SharedTensor entropies(Party& p, int phase, std::span<const std::size_t> ids) = 0;
};

// Runs the phase proxies under MPC. Party 0 holds the proxies and party 1 the
// dataset; the peer's pointers are null. The first call shares the data of
// its candidates once; later phases gather rows of that shared batch.
class ProxyEntropySource : public EntropySource {
 public:
  ProxyEntropySource(std::vector<ProxyArch> archs, const std::vector<ProxyModel>* proxies, const Dataset* data,
                     std::size_t batch_size);

  SharedTensor entropies(Party& p, int phase, std::span<const std::size_t> ids) override;

 private:
  std::vector<ProxyArch> archs_;
  const std::vector<ProxyModel>* proxies_;
  const Dataset* data_;
  std::size_t batch_size_;
  std::vector<std::size_t> shared_ids_;
  SharedBatch shared_;
};

// Test hook: party 1 inputs precomputed plaintext entropies for every
// dataset index; party 0 passes an empty vector.
class ExactEntropyStub : public EntropySource {
 public:
  explicit ExactEntropyStub(std::vector<double> values) : values_(std::move(values)) {}

  SharedTensor entropies(Party& p, int phase, std::span<const std::size_t> ids) override;

 private:
  std::vector<double> values_;
};

enum class AppraisalMode { kNone, kOpen, kThreshold };

std::string_view appraisal_name(AppraisalMode mode);
AppraisalMode parse_appraisal(std::string_view name);

struct AppraisalConfig {
  AppraisalMode mode = AppraisalMode::kNone;
  double threshold = 0.0;

  bool operator==(const AppraisalConfig&) const = default;
};

struct AppraisalResult {
  AppraisalMode mode = AppraisalMode::kNone;
  double mean = 0.0;  // kOpen
  bool above = false;  // kThreshold: mean > threshold

  bool operator==(const AppraisalResult&) const = default;
};

// Mean of the shared entropies, opened (kOpen) or compared against the
// public threshold with only the bit opened (kThreshold).
AppraisalResult appraise(Party& p, const SharedTensor& entropies, const AppraisalConfig& cfg);

struct PhaseRecord {
  std::size_t input_size = 0;
  std::size_t kept = 0;
  QuickSelectStats quickselect;

  bool operator==(const PhaseRecord&) const = default;
};

struct SelectionOutcome {
  std::vector<std::size_t> bootstrap;
  // survivors[0] is S_0 (candidates); survivors[i] is S_i. Dataset indices,
  // ascending.
  std::vector<std::vector<std::size_t>> survivors;
  std::vector<PhaseRecord> phases;
  std::vector<std::size_t> purchase;  // bootstrap plus S_N, ascending
  std::optional<AppraisalResult> appraisal;

  const std::vector<std::size_t>& selected() const { return survivors.back(); }
  bool operator==(const SelectionOutcome&) const = default;
};

// Ledger positions: phase i evaluates batch b at stage 2i and runs its
// QuickSelect at stage 2i+1 (batch -1).
SelectionOutcome run_selection(Party& p, const PhasePlan& plan, std::span<const std::size_t> bootstrap,
                               std::span<const std::size_t> candidates, EntropySource& source,
                               CounterPrng& pivots, const AppraisalConfig& appraisal);

// Plaintext reference: entropies(phase, ids) gives values that are
// quantized with `codec` and ranked by the same order.
using PlainEntropyFn = std::function<std::vector<double>(int phase, std::span<const std::size_t> ids)>;
std::vector<std::vector<std::size_t>> plain_selection(const PhasePlan& plan, std::span<const std::size_t> candidates,
                                                      const PlainEntropyFn& entropies, const FixedPointCodec& codec);

// ---------------------------------------------------------------------------
// End-to-end pipeline.

// "P": one phase, baseline kernels. "PM": one phase, MLPs. "PMT": the full
// multi-phase plan with MLPs. "full": PMT with the scheduler applied when
// costing (selection itself is identical to PMT).
enum class PipelineVariant { kP, kPM, kPMT, kFull };

std::string_view pipeline_variant_name(PipelineVariant v);
PipelineVariant parse_pipeline_variant(std::string_view name);

struct PipelineConfig {
  SessionConfig session;
  PhasePlan plan;
  PipelineVariant variant = PipelineVariant::kPMT;
  std::size_t batch_size = 8;
  TrainConfig train;
  AppraisalConfig appraisal;
  TransportKind transport = TransportKind::kLoopback;
};

struct PipelineResult {
  SelectionOutcome outcome;
  CostLedger ledger;  // party 0's view; both parties' ledgers are checked equal
  RevealLog reveals;
  std::vector<ProxyModel> proxies;
};

// Bootstrap, proxy construction on the bootstrap examples, then MPC
// selection. Seeds derive from config.session.seed by name: "bootstrap",
// "synth" (MLP training) and "quickselect-pivots".
// With `prebuilt`, MLP-variant proxies are taken from it by spec instead of
// being trained; every spec the run needs must be present.
PipelineResult run_pipeline(const PipelineConfig& config, const TransformerWeights& target, const Dataset& data,
                            std::span<const ProxyModel> prebuilt = {});

// The pipeline's bootstrap draw for a dataset of `n` examples.
std::vector<std::size_t> pipeline_bootstrap(const PhasePlan& plan, std::size_t n, std::uint64_t seed);
// Training config the pipeline uses for its MLPs.
TrainConfig pipeline_train(const PipelineConfig& config);

}  // namespace psel
