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
#include <span>
#include <string_view>
#include <vector>

#include "psel/party.h"
#include "psel/shares.h"

// Two-party protocols over additive shares in Z_{2^k}. Every function is
// called by both parties in the same order with their own views. Values are
// fixed-point with the session's fractional bits unless noted; "bit" tensors
// hold arithmetic shares of 0/1 at scale 1.

namespace psel {

// ---------------------------------------------------------------------------
// Sharing and opening.

// `owner` supplies `values`; the other party passes an empty span. One round
// in which only the owner sends.
SharedTensor input(Party& p, int owner, const Shape& shape, std::span<const double> values);
SharedTensor input_words(Party& p, int owner, const Shape& shape, std::span<const RingElement> words);

// Public tensor: party 0 holds the encoding, party 1 holds zeros. Free.
SharedTensor public_tensor(Party& p, const Shape& shape, std::span<const double> values);
SharedTensor constant(Party& p, const Shape& shape, double value);
SharedTensor zeros(Party& p, const Shape& shape);

// Opens to both parties and appends the values to the reveal log.
std::vector<double> reveal(Party& p, const SharedTensor& x, RevealKind kind, std::string_view what);

// ---------------------------------------------------------------------------
// Local linear operations. Zero rounds.

SharedTensor add(Party& p, const SharedTensor& x, const SharedTensor& y);
SharedTensor sub(Party& p, const SharedTensor& x, const SharedTensor& y);
SharedTensor neg(Party& p, const SharedTensor& x);
SharedTensor add_public(Party& p, const SharedTensor& x, double c);
// Multiplies by an integer; exact and free.
SharedTensor mul_int(Party& p, const SharedTensor& x, std::int64_t c);
// Multiplies by a real. Integers are free; otherwise one truncation round.
SharedTensor mul_public(Party& p, const SharedTensor& x, double c);
// x[rows, cols] + v broadcast along `axis` (v has one entry per row or per column).
SharedTensor add_broadcast(Party& p, const SharedTensor& x, const SharedTensor& v, BroadcastAxis axis);
// Sum over the last dimension; result drops that dimension.
SharedTensor sum_last(Party& p, const SharedTensor& x);

// ---------------------------------------------------------------------------
// Layout helpers. Local and free.

SharedTensor reshape(const SharedTensor& x, const Shape& shape);
// Swaps the last two dimensions.
SharedTensor transpose_last(const SharedTensor& x);
// Columns [begin, end) of x viewed as [rows, last].
SharedTensor slice_cols(const SharedTensor& x, std::size_t begin, std::size_t end);
// Rows `index` of x viewed as [rows, last].
SharedTensor gather_rows(const SharedTensor& x, std::span<const std::size_t> index);
// Concatenates along the last dimension; leading shapes must agree.
SharedTensor concat_cols(std::span<const SharedTensor> parts);
// Concatenates along the first dimension.
SharedTensor concat_rows(std::span<const SharedTensor> parts);

// ---------------------------------------------------------------------------
// Multiplication.

// Probabilistic truncation by 2^shift with a dealt pair: one round, error at
// most one unit. Requires |x| < 2^(k-2).
SharedTensor truncate(Party& p, const SharedTensor& x, int shift);

// Beaver multiplication: one round opening (x - a, y - b). The raw form keeps
// the doubled scale; the plain form truncates (one more round).
SharedTensor mul_raw_with(Party& p, const SharedTensor& x, const SharedTensor& y, BeaverTriple& t);
SharedTensor mul_raw(Party& p, const SharedTensor& x, const SharedTensor& y);
SharedTensor mul(Party& p, const SharedTensor& x, const SharedTensor& y);
// x * x with a square pair: opens one word per element.
SharedTensor square(Party& p, const SharedTensor& x);
// x[rows, cols] * v broadcast along `axis`; opens rows*cols + |v| words.
SharedTensor mul_broadcast_raw(Party& p, const SharedTensor& x, const SharedTensor& v,
                               BroadcastAxis axis);
SharedTensor mul_broadcast(Party& p, const SharedTensor& x, const SharedTensor& v, BroadcastAxis axis);

// X[m, k] * Y[k, n], or batched X[b, m, k] * Y[b, k, n]. One round opening
// m*k + k*n words per slot, then a truncation round.
SharedTensor matmul_raw(Party& p, const SharedTensor& x, const SharedTensor& y);
SharedTensor matmul(Party& p, const SharedTensor& x, const SharedTensor& y);

// ---------------------------------------------------------------------------
// Comparison.

// XOR-shared sign bits (in bit 0) of x via a parallel-prefix adder over the
// two shares: one AND round for generate bits, then ceil(log2(k-1)) prefix
// levels.
std::vector<RingElement> msb_xor(Party& p, const SharedTensor& x);
// Arithmetic share of the sign bit at scale 1. Adder rounds plus one
// conversion round.
SharedTensor msb(Party& p, const SharedTensor& x);
// Opens [a < b] elementwise (strict; ties give 0) and logs the bits under
// `kind`. The ledger carries the configured per-comparison cost model when
// enabled.
std::vector<std::uint8_t> compare_open(Party& p, const SharedTensor& a, const SharedTensor& b,
                                       RevealKind kind = RevealKind::kComparisonBit);

// max(x, 0) = x * (1 - msb(x)).
SharedTensor relu(Party& p, const SharedTensor& x);
// bit ? a : b, with `bit` at scale 1. One round.
SharedTensor select(Party& p, const SharedTensor& bit, const SharedTensor& a, const SharedTensor& b);

// Rounds and bytes (both parties) of one real comparison protocol run on
// the session's ring, from the adder structure.
struct ProtocolCost {
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
};
ProtocolCost compare_analytic_cost(int ring_bits);

}  // namespace psel
