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

#include "psel/party.h"

namespace psel {

void SessionConfig::validate() const {
  PSEL_ENFORCE(ring_bits >= 8 && ring_bits <= 64, kConfig, "ring bits " << ring_bits << " outside [8, 64]");
  if (ring_bits == 64) {
    PSEL_ENFORCE(frac_bits >= 8 && frac_bits <= 24, kConfig,
                 "fractional bits " << frac_bits << " outside [8, 24]");
  } else {
    PSEL_ENFORCE(frac_bits >= 0 && frac_bits <= ring_bits - 4, kConfig,
                 "fractional bits " << frac_bits << " too large for a " << ring_bits << "-bit ring");
  }
  network.validate();
  PSEL_ENFORCE(kernels.exp_iters >= 1 && kernels.exp_iters <= 16, kConfig,
               "exp iterations " << kernels.exp_iters << " outside [1, 16]");
  PSEL_ENFORCE(kernels.reciprocal_iters >= 1 && kernels.rsqrt_iters >= 1 && kernels.log_iters >= 1,
               kConfig, "kernel iteration counts must be positive");
}

Party::Party(int id, const SessionConfig& config, Channel& channel)
    : id_(id),
      config_(config),
      codec_(config.codec()),
      channel_(channel),
      dealer_(derive_seed(config.seed, "dealer"), Ring(config.ring_bits)),
      ledger_(config.network),
      private_rng_(derive_seed(config.seed, "input"), static_cast<std::uint64_t>(id)) {
  PSEL_ENFORCE(id == 0 || id == 1, kConfig, "party id must be 0 or 1, got " << id);
  dealer_.set_product_budget(config.product_budget);
}

std::uint64_t op_hash(std::string_view op) { return derive_seed(0, op); }

std::vector<RingElement> Party::exchange(std::span<const RingElement> mine, std::string_view op) {
  std::vector<RingElement> theirs = channel_.exchange(op_hash(op), mine);
  const std::uint64_t my_bytes = 8 * mine.size();
  const std::uint64_t their_bytes = 8 * theirs.size();
  const std::uint64_t sent0 = id_ == 0 ? my_bytes : their_bytes;
  const std::uint64_t sent1 = id_ == 0 ? their_bytes : my_bytes;
  const std::string tag = tag_or(op);
  if (analytic_depth_ > 0) {
    ledger_.record_analytic(analytic_tag_, sent0, sent1);
  } else {
    ledger_.record_exchange(tag, sent0, sent1);
  }
  return theirs;
}

void Party::add_flops(std::uint64_t flops) { ledger_.add_flops(tag_or("local"), flops); }

std::string Party::tag_or(std::string_view fallback) const {
  return tags_.empty() ? std::string(fallback) : tags_.front();
}

TagScope::TagScope(Party& party, std::string tag) : party_(party) {
  party_.tags_.push_back(std::move(tag));
}

TagScope::~TagScope() { party_.tags_.pop_back(); }

AnalyticScope::AnalyticScope(Party& party, std::string_view op, std::uint64_t rounds,
                             std::uint64_t bytes)
    : party_(party),
      tag_(party.tag_or(op)),
      rounds_(rounds),
      bytes_(bytes),
      uncaught_(std::uncaught_exceptions()) {
  if (party_.analytic_depth_++ == 0) party_.analytic_tag_ = tag_;
}

AnalyticScope::~AnalyticScope() {
  --party_.analytic_depth_;
  if (std::uncaught_exceptions() > uncaught_) return;
  if (party_.analytic_depth_ == 0) party_.ledger_.charge(tag_, rounds_, bytes_);
}

std::string_view transport_name(TransportKind kind) {
  return kind == TransportKind::kLoopback ? "loopback" : "socket";
}

TransportKind parse_transport(std::string_view name) {
  if (name == "loopback") return TransportKind::kLoopback;
  if (name == "socket") return TransportKind::kSocket;
  throw_error(ErrorCategory::kConfig, "unknown transport '" + std::string(name) + "'");
}

namespace internal {

std::array<std::unique_ptr<Channel>, 2> make_channels(TransportKind kind) {
  if (kind == TransportKind::kLoopback) return make_loopback_pair();
  const auto fds = stream_socket_pair();
  return {std::make_unique<SocketChannel>(fds[0]), std::make_unique<SocketChannel>(fds[1])};
}

void rethrow_root(const std::array<std::exception_ptr, 2>& errors) {
  auto is_transport = [](const std::exception_ptr& e) {
    try {
      std::rethrow_exception(e);
    } catch (const Error& err) {
      return err.category() == ErrorCategory::kTransport;
    } catch (...) {
      return false;
    }
  };
  for (const auto& e : errors) {
    if (e && !is_transport(e)) std::rethrow_exception(e);
  }
  std::rethrow_exception(errors[0] ? errors[0] : errors[1]);
}

}  // namespace internal

}  // namespace psel
