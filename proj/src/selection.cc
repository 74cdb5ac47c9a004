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

#include "psel/selection.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <random>

#include "psel/error.h"
#include "psel/protocols.h"

namespace psel {

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, CounterPrng& rng) {
  PSEL_ENFORCE(count <= population, kConfig, "cannot sample " << count << " of " << population << " indices");
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  // std::sample keeps input order, so the result ascends.
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

std::vector<std::size_t> bootstrap_sample(std::size_t population, double fraction, CounterPrng& rng) {
  PSEL_ENFORCE(fraction > 0.0 && fraction <= 1.0, kConfig, "bootstrap fraction " << fraction << " outside (0, 1]");
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(population) + 0.5));
  return sample_indices(population, count, rng);
}

std::size_t keep_count(double alpha, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 0.5));
  return std::max<std::size_t>(k, 1);
}

namespace {

SharedTensor gather(const SharedTensor& x, std::span<const std::size_t> index) {
  SharedTensor out;
  out.party = x.party;
  out.shape = {index.size()};
  out.share.reserve(index.size());
  for (std::size_t i : index) {
    PSEL_ENFORCE(i < x.size(), kShape, "element " << i << " out of " << x.size());
    out.share.push_back(x.share[i]);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> secure_quickselect_topk(Party& p, const SharedTensor& values, std::size_t k,
                                                 CounterPrng& pivots, QuickSelectStats* stats) {
  const std::size_t n = values.size();
  PSEL_ENFORCE(k >= 1 && k <= n, kConfig, "top-k needs 1 <= k <= n, got k=" << k << " n=" << n);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> cand(n);
  std::iota(cand.begin(), cand.end(), std::size_t{0});
  std::size_t need = k;
  QuickSelectStats local;
  while (need > 0) {
    if (need == cand.size()) {
      chosen.insert(chosen.end(), cand.begin(), cand.end());
      break;
    }
    std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
    const std::size_t pivot = cand[pick(pivots)];
    std::vector<std::size_t> lhs, rhs, others;
    for (std::size_t i : cand) {
      if (i == pivot) continue;
      others.push_back(i);
      // Lower positions rank first among equal values, so [v_i < v_p] and
      // [v_p < v_i] are the right strict tests on each side of the pivot.
      lhs.push_back(i < pivot ? i : pivot);
      rhs.push_back(i < pivot ? pivot : i);
    }
    const auto bits = compare_open(p, gather(values, lhs), gather(values, rhs));
    local.comparisons += others.size();
    ++local.passes;
    std::vector<std::size_t> above, below;
    for (std::size_t j = 0; j < others.size(); ++j) {
      const bool up = others[j] < pivot ? bits[j] == 0 : bits[j] == 1;
      (up ? above : below).push_back(others[j]);
    }
    if (need <= above.size()) {
      cand = std::move(above);
      continue;
    }
    chosen.insert(chosen.end(), above.begin(), above.end());
    chosen.push_back(pivot);
    need -= above.size() + 1;
    cand = std::move(below);
  }
  std::sort(chosen.begin(), chosen.end());
  if (stats) {
    stats->comparisons += local.comparisons;
    stats->passes += local.passes;
  }
  return chosen;
}

std::vector<std::size_t> plain_topk(std::span<const std::int64_t> values, std::size_t k) {
  PSEL_ENFORCE(k >= 1 && k <= values.size(), kConfig,
               "top-k needs 1 <= k <= n, got k=" << k << " n=" << values.size());
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

// ---------------------------------------------------------------------------

std::size_t PhasePlan::bootstrap_count() const {
  return static_cast<std::size_t>(std::floor(bootstrap_fraction * static_cast<double>(budget) + 0.5));
}

std::vector<std::size_t> PhasePlan::sizes(std::size_t candidates) const {
  std::vector<std::size_t> out{candidates};
  for (const Phase& ph : phases) out.push_back(keep_count(ph.selectivity, out.back()));
  return out;
}

void PhasePlan::validate(const TransformerConfig& target, std::size_t dataset_size) const {
  PSEL_ENFORCE(!phases.empty(), kConfig, "phase plan is empty");
  PSEL_ENFORCE(bootstrap_fraction > 0.0 && bootstrap_fraction < 1.0, kConfig,
               "bootstrap fraction " << bootstrap_fraction << " outside (0, 1)");
  PSEL_ENFORCE(budget >= 1 && budget <= dataset_size, kConfig,
               "budget " << budget << " outside [1, " << dataset_size << "]");
  const std::size_t boot = bootstrap_count();
  PSEL_ENFORCE(boot >= 1 && boot < budget, kConfig,
               "bootstrap of " << boot << " examples leaves nothing to select within budget " << budget);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Phase& ph = phases[i];
    PSEL_ENFORCE(ph.selectivity > 0.0 && ph.selectivity < 1.0, kConfig,
                 "phase " << i << " selectivity " << ph.selectivity << " outside (0, 1)");
    ph.spec.validate(target);
    if (i > 0) {
      const ProxySpec& prev = phases[i - 1].spec;
      PSEL_ENFORCE(ph.spec.layers >= prev.layers && ph.spec.heads >= prev.heads && ph.spec.hidden >= prev.hidden,
                   kConfig, "phase " << i << " proxy is smaller than phase " << i - 1 << "'s");
    }
  }
  const std::size_t want = budget - boot;
  const std::size_t got = sizes(dataset_size - boot).back();
  const std::size_t gap = got > want ? got - want : want - got;
  PSEL_ENFORCE(gap <= phases.size(), kConfig,
               "selectivities keep " << got << " examples but the budget leaves room for " << want);
}

PhasePlan PhasePlan::collapsed(std::size_t candidates) const {
  PSEL_ENFORCE(!phases.empty() && candidates >= 1, kConfig, "nothing to collapse");
  PhasePlan out = *this;
  const double kept = static_cast<double>(sizes(candidates).back());
  out.phases = {Phase{phases.back().spec, kept / static_cast<double>(candidates)}};
  return out;
}

// ---------------------------------------------------------------------------

ProxyEntropySource::ProxyEntropySource(std::vector<ProxyArch> archs, const std::vector<ProxyModel>* proxies,
                                       const Dataset* data, std::size_t batch_size)
    : archs_(std::move(archs)), proxies_(proxies), data_(data), batch_size_(batch_size) {
  PSEL_ENFORCE(batch_size_ >= 1, kConfig, "batch size must be at least 1");
  PSEL_ENFORCE(!proxies_ || proxies_->size() == archs_.size(), kConfig,
               proxies_->size() << " proxies for " << archs_.size() << " phases");
}

SharedTensor ProxyEntropySource::entropies(Party& p, int phase, std::span<const std::size_t> ids) {
  PSEL_ENFORCE(phase >= 0 && static_cast<std::size_t>(phase) < archs_.size(), kConfig,
               "no proxy for phase " << phase);
  const ProxyArch& arch = archs_[phase];
  const std::size_t t = arch.config.seq_len;
  p.ledger().set_position(2 * phase, -1);
  const SharedProxy proxy = share_proxy(p, 0, arch, proxies_ ? &(*proxies_)[phase] : nullptr);
  if (shared_ids_.empty()) {
    shared_ids_.assign(ids.begin(), ids.end());
    PSEL_ENFORCE(std::is_sorted(shared_ids_.begin(), shared_ids_.end()), kConfig, "candidate ids must ascend");
    Dataset rows;
    if (data_) rows = data_->subset(shared_ids_);
    shared_ = share_batch(p, 1, proxy, data_ ? &rows : nullptr, shared_ids_.size());
  }
  std::vector<std::size_t> pos(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = std::lower_bound(shared_ids_.begin(), shared_ids_.end(), ids[i]);
    PSEL_ENFORCE(it != shared_ids_.end() && *it == ids[i], kConfig, "index " << ids[i] << " was never shared");
    pos[i] = static_cast<std::size_t>(it - shared_ids_.begin());
  }
  SharedTensor out;
  out.party = p.id();
  out.shape = {ids.size()};
  for (std::size_t b = 0; b * batch_size_ < ids.size(); ++b) {
    const std::size_t begin = b * batch_size_, end = std::min(ids.size(), begin + batch_size_);
    p.ledger().set_position(2 * phase, static_cast<int>(b));
    const std::span<const std::size_t> rows(pos.data() + begin, end - begin);
    const SharedTensor e = forward_entropy_mpc(p, proxy, slice_batch(shared_, t, rows));
    out.share.insert(out.share.end(), e.share.begin(), e.share.end());
  }
  return out;
}

SharedTensor ExactEntropyStub::entropies(Party& p, int phase, std::span<const std::size_t> ids) {
  std::vector<double> vals;
  if (p.id() == 1) {
    for (std::size_t i : ids) {
      PSEL_ENFORCE(i < values_.size(), kConfig, "no entropy for index " << i);
      vals.push_back(values_[i]);
    }
  }
  p.ledger().set_position(2 * phase, 0);
  TagScope tag(p, "input");
  return input(p, 1, {ids.size()}, vals);
}

// ---------------------------------------------------------------------------

std::string_view appraisal_name(AppraisalMode mode) {
  switch (mode) {
    case AppraisalMode::kNone:
      return "none";
    case AppraisalMode::kOpen:
      return "open";
    case AppraisalMode::kThreshold:
      return "threshold";
  }
  return "?";
}

AppraisalMode parse_appraisal(std::string_view name) {
  for (auto m : {AppraisalMode::kNone, AppraisalMode::kOpen, AppraisalMode::kThreshold}) {
    if (appraisal_name(m) == name) return m;
  }
  throw_error(ErrorCategory::kConfig, "unknown appraisal mode '" + std::string(name) + "'");
}

AppraisalResult appraise(Party& p, const SharedTensor& entropies, const AppraisalConfig& cfg) {
  const std::size_t n = entropies.size();
  PSEL_ENFORCE(n >= 1, kDomain, "cannot appraise an empty selection");
  PSEL_ENFORCE(cfg.mode != AppraisalMode::kNone, kConfig, "appraisal mode is none");
  TagScope tag(p, "appraisal");
  const SharedTensor mean =
      mul_public(p, sum_last(p, reshape(entropies, {n})), 1.0 / static_cast<double>(n));
  AppraisalResult out;
  out.mode = cfg.mode;
  if (cfg.mode == AppraisalMode::kOpen) {
    out.mean = reveal(p, mean, RevealKind::kAppraisalMean, "appraisal")[0];
  } else {
    out.above = compare_open(p, constant(p, {1}, cfg.threshold), mean, RevealKind::kAppraisalBit)[0] == 1;
  }
  return out;
}

SelectionOutcome run_selection(Party& p, const PhasePlan& plan, std::span<const std::size_t> bootstrap,
                               std::span<const std::size_t> candidates, EntropySource& source,
                               CounterPrng& pivots, const AppraisalConfig& appraisal) {
  PSEL_ENFORCE(!plan.phases.empty(), kConfig, "phase plan is empty");
  PSEL_ENFORCE(!candidates.empty(), kConfig, "no candidates to select from");
  SelectionOutcome out;
  out.bootstrap.assign(bootstrap.begin(), bootstrap.end());
  out.survivors.emplace_back(candidates.begin(), candidates.end());
  SharedTensor final_entropies;
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    const std::vector<std::size_t>& cur = out.survivors.back();
    const int phase = static_cast<int>(i);
    const SharedTensor e = source.entropies(p, phase, cur);
    PSEL_ENFORCE(e.size() == cur.size(), kShape, "entropy source returned " << e.size() << " values for "
                                                                              << cur.size() << " candidates");
    PhaseRecord rec;
    rec.input_size = cur.size();
    rec.kept = keep_count(plan.phases[i].selectivity, cur.size());
    p.ledger().set_position(2 * phase + 1, -1);
    std::vector<std::size_t> pos;
    {
      TagScope tag(p, "quickselect");
      pos = secure_quickselect_topk(p, e, rec.kept, pivots, &rec.quickselect);
    }
    std::vector<std::size_t> next;
    next.reserve(pos.size());
    for (std::size_t j : pos) next.push_back(cur[j]);
    if (i + 1 == plan.phases.size()) final_entropies = gather(e, pos);
    out.phases.push_back(rec);
    out.survivors.push_back(std::move(next));
  }
  const auto& selected = out.survivors.back();
  p.reveals().append(RevealKind::kFinalIndices, "selection", std::vector<double>(selected.begin(), selected.end()));
  std::set_union(out.bootstrap.begin(), out.bootstrap.end(), selected.begin(), selected.end(),
                 std::back_inserter(out.purchase));
  if (appraisal.mode != AppraisalMode::kNone) {
    p.ledger().set_position(2 * static_cast<int>(plan.phases.size()), -1);
    out.appraisal = appraise(p, final_entropies, appraisal);
  }
  return out;
}

std::vector<std::vector<std::size_t>> plain_selection(const PhasePlan& plan, std::span<const std::size_t> candidates,
                                                      const PlainEntropyFn& entropies, const FixedPointCodec& codec) {
  std::vector<std::vector<std::size_t>> out;
  out.emplace_back(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    const std::vector<std::size_t>& cur = out.back();
    const std::vector<double> vals = entropies(static_cast<int>(i), cur);
    PSEL_ENFORCE(vals.size() == cur.size(), kShape, "oracle returned " << vals.size() << " entropies");
    std::vector<std::int64_t> q(vals.size());
    for (std::size_t j = 0; j < vals.size(); ++j) q[j] = codec.ring().to_signed(codec.encode(vals[j]));
    std::vector<std::size_t> next;
    for (std::size_t j : plain_topk(q, keep_count(plan.phases[i].selectivity, cur.size()))) next.push_back(cur[j]);
    out.push_back(std::move(next));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view pipeline_variant_name(PipelineVariant v) {
  switch (v) {
    case PipelineVariant::kP:
      return "P";
    case PipelineVariant::kPM:
      return "PM";
    case PipelineVariant::kPMT:
      return "PMT";
    case PipelineVariant::kFull:
      return "full";
  }
  return "?";
}

PipelineVariant parse_pipeline_variant(std::string_view name) {
  for (auto v : {PipelineVariant::kP, PipelineVariant::kPM, PipelineVariant::kPMT, PipelineVariant::kFull}) {
    if (pipeline_variant_name(v) == name) return v;
  }
  throw_error(ErrorCategory::kConfig, "unknown variant '" + std::string(name) + "' (expected P, PM, PMT or full)");
}

std::vector<std::size_t> pipeline_bootstrap(const PhasePlan& plan, std::size_t n, std::uint64_t seed) {
  CounterPrng boot_rng(derive_seed(seed, "bootstrap"), 0);
  return sample_indices(n, plan.bootstrap_count(), boot_rng);
}

TrainConfig pipeline_train(const PipelineConfig& config) {
  TrainConfig train = config.train;
  train.seed = derive_seed(config.session.seed, "synth");
  return train;
}

PipelineResult run_pipeline(const PipelineConfig& config, const TransformerWeights& target, const Dataset& data,
                            std::span<const ProxyModel> prebuilt) {
  config.session.validate();
  target.validate();
  data.validate();
  PSEL_ENFORCE(data.seq_len == target.config.seq_len && data.tokens == (target.config.vocab > 0), kShape,
               "dataset does not fit the target model");
  config.plan.validate(target.config, data.size());
  const std::uint64_t seed = config.session.seed;

  const std::vector<std::size_t> bootstrap = pipeline_bootstrap(config.plan, data.size(), seed);
  std::vector<std::size_t> all(data.size()), candidates;
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::set_difference(all.begin(), all.end(), bootstrap.begin(), bootstrap.end(), std::back_inserter(candidates));

  const bool multiphase = config.variant == PipelineVariant::kPMT || config.variant == PipelineVariant::kFull;
  const PhasePlan plan = multiphase ? config.plan : config.plan.collapsed(candidates.size());
  const ProxyVariant pv = config.variant == PipelineVariant::kP ? ProxyVariant::kBaseline : ProxyVariant::kMlp;

  PipelineResult result;
  const TrainConfig train = pipeline_train(config);
  const Dataset boot_data = data.subset(bootstrap);
  std::vector<ProxyArch> archs;
  for (const Phase& ph : plan.phases) {
    ProxyModel proxy;
    if (pv == ProxyVariant::kMlp && !prebuilt.empty()) {
      const auto it = std::find_if(prebuilt.begin(), prebuilt.end(),
                                   [&](const ProxyModel& m) { return m.spec == ph.spec; });
      PSEL_ENFORCE(it != prebuilt.end(), kConfig,
                   "no prebuilt proxy for <" << ph.spec.layers << "," << ph.spec.heads << "," << ph.spec.hidden
                                             << ">");
      it->validate();
      proxy = *it;
    } else if (pv == ProxyVariant::kMlp) {
      proxy = build_proxy(target, ph.spec, boot_data, train);
    } else {
      proxy.spec = ph.spec;
      proxy.weights = proxy_base(target, ph.spec);
    }
    archs.push_back(proxy_arch(proxy, pv));
    result.proxies.push_back(std::move(proxy));
  }

  auto run = run_two_party(
      config.session,
      [&](Party& p) {
        CounterPrng pivots(derive_seed(seed, "quickselect-pivots"), 0);
        ProxyEntropySource source(archs, p.id() == 0 ? &result.proxies : nullptr, p.id() == 1 ? &data : nullptr,
                                  config.batch_size);
        return run_selection(p, plan, bootstrap, candidates, source, pivots, config.appraisal);
      },
      config.transport);
  PSEL_ENFORCE(run.out[0] == run.out[1] && run.ledgers[0] == run.ledgers[1] && run.reveals[0] == run.reveals[1],
               kProtocol, "parties disagree on the selection outcome");
  result.outcome = std::move(run.out[0]);
  result.ledger = std::move(run.ledgers[0]);
  result.reveals = std::move(run.reveals[0]);
  return result;
}

}  // namespace psel
