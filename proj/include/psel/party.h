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

#include <array>
#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "psel/error.h"
#include "psel/prng.h"
#include "psel/ring.h"
#include "psel/shares.h"
#include "psel/transport.h"

namespace psel {

// Ledger cost charged for one scalar secure comparison that opens its result.
// With `use_model` the ledger carries these figures and the protocol's real
// traffic goes to the analytic side ledger; otherwise the real traffic is
// charged directly.
struct ComparisonCost {
  bool use_model = true;
  std::uint64_t rounds = 8;
  std::uint64_t bytes = 432;

  bool operator==(const ComparisonCost&) const = default;
};

enum class DomainMode { kStrict, kPermissive };

struct KernelConfig {
  int exp_iters = 8;
  int reciprocal_iters = 10;
  int rsqrt_iters = 10;
  int log_iters = 15;
  DomainMode domain = DomainMode::kStrict;

  bool operator==(const KernelConfig&) const = default;
};

struct SessionConfig {
  int ring_bits = 64;
  int frac_bits = 16;
  NetworkModel network;
  ComparisonCost comparison;
  KernelConfig kernels;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> product_budget;

  void validate() const;
  FixedPointCodec codec() const { return FixedPointCodec(frac_bits, Ring(ring_bits)); }
  bool operator==(const SessionConfig&) const = default;
};

// One compute party's state: identity, channel, dealer component, ledger and
// reveal log. Both parties run the same protocol code against their own Party.
class Party {
 public:
  Party(int id, const SessionConfig& config, Channel& channel);

  int id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const FixedPointCodec& codec() const { return codec_; }
  const Ring& ring() const { return codec_.ring(); }
  TripleDealer& dealer() { return dealer_; }
  CostLedger& ledger() { return ledger_; }
  const CostLedger& ledger() const { return ledger_; }
  RevealLog& reveals() { return reveals_; }
  const RevealLog& reveals() const { return reveals_; }
  // Party-private randomness (input masking). Never shared with the peer.
  CounterPrng& private_rng() { return private_rng_; }

  // One synchronized round. `op` names the protocol step; it guards against
  // desync and labels the ledger entry when no TagScope is active.
  std::vector<RingElement> exchange(std::span<const RingElement> mine, std::string_view op);
  void add_flops(std::uint64_t flops);

  // Ledger tag in effect: the outermost open TagScope, else `fallback`.
  std::string tag_or(std::string_view fallback) const;

 private:
  friend class TagScope;
  friend class AnalyticScope;

  int id_;
  SessionConfig config_;
  FixedPointCodec codec_;
  Channel& channel_;
  TripleDealer dealer_;
  CostLedger ledger_;
  RevealLog reveals_;
  CounterPrng private_rng_;
  std::vector<std::string> tags_;
  int analytic_depth_ = 0;
  std::string analytic_tag_;
};

// Labels every exchange within its lifetime. Nested scopes do not override
// an enclosing one, so composite ops are billed to the caller's module.
class TagScope {
 public:
  TagScope(Party& party, std::string tag);
  ~TagScope();
  TagScope(const TagScope&) = delete;
  TagScope& operator=(const TagScope&) = delete;

 private:
  Party& party_;
};

// Routes exchanges to the analytic side ledger; on close, charges the
// ledger `rounds` and `bytes` under the current tag instead.
class AnalyticScope {
 public:
  AnalyticScope(Party& party, std::string_view op, std::uint64_t rounds, std::uint64_t bytes);
  ~AnalyticScope();
  AnalyticScope(const AnalyticScope&) = delete;
  AnalyticScope& operator=(const AnalyticScope&) = delete;

 private:
  Party& party_;
  std::string tag_;
  std::uint64_t rounds_;
  std::uint64_t bytes_;
  int uncaught_;
};

std::uint64_t op_hash(std::string_view op);

enum class TransportKind { kLoopback, kSocket };

std::string_view transport_name(TransportKind kind);
TransportKind parse_transport(std::string_view name);

template <class R>
struct TwoPartyRun {
  std::array<R, 2> out;
  std::array<CostLedger, 2> ledgers;
  std::array<RevealLog, 2> reveals;
  std::array<DealerCounters, 2> counters;
};

namespace internal {

std::array<std::unique_ptr<Channel>, 2> make_channels(TransportKind kind);
// Picks the failure to report: a party's own error beats the peer's
// resulting transport error.
[[noreturn]] void rethrow_root(const std::array<std::exception_ptr, 2>& errors);

}  // namespace internal

// Runs `fn(Party&)` for both parties concurrently, each in its own thread,
// and collects both results. If either party throws, its channel is aborted
// so the peer unblocks, and the originating error is rethrown.
template <class Fn>
auto run_two_party(const SessionConfig& config, Fn&& fn, TransportKind kind = TransportKind::kLoopback)
    -> TwoPartyRun<decltype(fn(std::declval<Party&>()))> {
  using R = decltype(fn(std::declval<Party&>()));
  config.validate();
  auto channels = internal::make_channels(kind);
  TwoPartyRun<R> run;
  std::array<std::exception_ptr, 2> errors;
  auto body = [&](int id) {
    try {
      Party party(id, config, *channels[id]);
      run.out[id] = fn(party);
      party.ledger().flush();
      run.ledgers[id] = party.ledger();
      run.reveals[id] = party.reveals();
      run.counters[id] = party.dealer().counters();
    } catch (...) {
      errors[id] = std::current_exception();
      channels[id]->abort();
    }
  };
  std::thread peer(body, 1);
  body(0);
  peer.join();
  if (errors[0] || errors[1]) internal::rethrow_root(errors);
  return run;
}

}  // namespace psel
