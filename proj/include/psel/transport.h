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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psel/ring.h"

namespace psel {

// Wide-area link between the two parties. Time is simulated, never measured.
struct NetworkModel {
  double bandwidth = 1e8;  // bytes per second
  double latency = 0.1;    // seconds per round

  void validate() const;
  bool operator==(const NetworkModel&) const = default;
};

// rounds * latency + transfer_bytes / bandwidth, where transfer_bytes is the
// per-round larger direction summed over rounds.
double simulated_time(std::uint64_t rounds, std::uint64_t transfer_bytes, const NetworkModel& model);

struct TagCost {
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;           // both directions
  std::uint64_t transfer_bytes = 0;  // larger direction per round, summed
  double seconds = 0.0;
  std::uint64_t flops = 0;

  TagCost& operator+=(const TagCost& o);
  bool operator==(const TagCost&) const = default;
};

// One communication step of a run: local compute since the previous step
// followed by `rounds` synchronized exchanges. Steps carry the stage/batch
// position so the scheduler can rebuild the operator DAG.
struct TraceStep {
  std::string tag;
  int stage = 0;
  int batch = -1;
  std::uint64_t flops = 0;
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
  std::uint64_t transfer_bytes = 0;
  double seconds = 0.0;

  bool operator==(const TraceStep&) const = default;
};

class CostLedger {
 public:
  explicit CostLedger(NetworkModel model = {});

  const NetworkModel& model() const { return model_; }

  // One synchronized round in which party 0 sent `sent0` bytes and party 1
  // sent `sent1` bytes.
  void record_exchange(const std::string& tag, std::uint64_t sent0, std::uint64_t sent1);
  // A cost-model charge standing in for a protocol's real rounds. Time is
  // rounds * latency + bytes / bandwidth.
  void charge(const std::string& tag, std::uint64_t rounds, std::uint64_t bytes);
  // Real cost of a protocol whose ledger entry was model-charged.
  void record_analytic(const std::string& tag, std::uint64_t sent0, std::uint64_t sent1);
  void add_flops(const std::string& tag, std::uint64_t flops);
  void set_position(int stage, int batch);
  // Emits a compute-only step for flops not yet followed by communication.
  void flush();

  const std::map<std::string, TagCost>& tags() const { return tags_; }
  const std::map<std::string, TagCost>& analytic() const { return analytic_; }
  const std::vector<TraceStep>& trace() const { return trace_; }
  TagCost total() const;

  bool operator==(const CostLedger& o) const;

 private:
  TraceStep& open_step(const std::string& tag);

  NetworkModel model_;
  std::map<std::string, TagCost> tags_;
  std::map<std::string, TagCost> analytic_;
  std::vector<TraceStep> trace_;
  std::uint64_t pending_flops_ = 0;
  std::string pending_tag_;
  int stage_ = 0;
  int batch_ = -1;
};

struct CostRow {
  std::string tag;
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
  double byte_share = 0.0;  // percent of total bytes
};

std::vector<CostRow> cost_rows(const CostLedger& ledger);
std::string format_cost_table(const std::vector<CostRow>& rows);
nlohmann::ordered_json cost_json(const CostLedger& ledger);

// ---------------------------------------------------------------------------
// Reveal log: every plaintext opened during a run.

enum class RevealKind {
  kComparisonBit,
  kFinalIndices,
  kAppraisalMean,
  kAppraisalBit,
  kIntermediate,
};

std::string_view reveal_kind_name(RevealKind kind);

struct RevealEntry {
  RevealKind kind;
  std::string tag;
  std::vector<double> values;

  bool operator==(const RevealEntry&) const = default;
};

class RevealLog {
 public:
  void append(RevealKind kind, std::string tag, std::vector<double> values);
  const std::vector<RevealEntry>& entries() const { return entries_; }
  std::size_t count(RevealKind kind) const;
  // Passes iff every entry is a comparison bit or a final output
  // (selected indices, appraisal mean or bit).
  bool audit(std::string* why = nullptr) const;
  // Stable digest of kinds, tags and values.
  std::string digest() const;

  bool operator==(const RevealLog&) const = default;

 private:
  std::vector<RevealEntry> entries_;
};

// ---------------------------------------------------------------------------
// Wire format. A frame is a 4-byte little-endian length, a 1-byte message
// type and a payload of little-endian 8-byte words; length counts the type
// byte plus the payload bytes.

enum class MsgType : std::uint8_t {
  kExchange = 0x01,
  kAbort = 0x02,
};

struct Frame {
  MsgType type = MsgType::kExchange;
  std::vector<RingElement> payload;

  bool operator==(const Frame&) const = default;
};

void put_le64(std::uint64_t v, std::uint8_t* out);
std::uint64_t get_le64(const std::uint8_t* in);

std::vector<std::uint8_t> encode_frame(const Frame& frame);
// Throws kTransport on truncated, oversized or malformed input.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// A bidirectional, strictly ordered channel between the two parties.
class Channel {
 public:
  virtual ~Channel() = default;

  // Sends `payload` under `tag` and returns the peer's payload for the same
  // round. Throws kProtocol when the peer is at a different tag or round,
  // kTransport when the link fails or the peer aborted.
  virtual std::vector<RingElement> exchange(std::uint64_t tag,
                                            std::span<const RingElement> payload) = 0;
  // Unblocks the peer after a local failure.
  virtual void abort() = 0;
};

// Deterministic in-process pair.
std::array<std::unique_ptr<Channel>, 2> make_loopback_pair();

// Framed stream socket. Takes ownership of `fd`.
class SocketChannel : public Channel {
 public:
  explicit SocketChannel(int fd);
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  std::vector<RingElement> exchange(std::uint64_t tag, std::span<const RingElement> payload) override;
  void abort() override;

 private:
  int fd_;
  std::uint64_t seq_ = 0;
};

std::array<int, 2> stream_socket_pair();
int tcp_listen(std::uint16_t port);
int tcp_accept(int listen_fd);
int tcp_connect(const std::string& host, std::uint16_t port);

}  // namespace psel
