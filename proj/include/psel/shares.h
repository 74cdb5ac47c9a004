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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psel/prng.h"
#include "psel/ring.h"

namespace psel {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One party's view of an additively shared tensor: share_0 + share_1 equals
// the encoded plaintext elementwise. Layout is row-major.
struct SharedTensor {
  int party = 0;
  Shape shape;
  std::vector<RingElement> share;

  std::size_t size() const { return share.size(); }
};

struct SharePair {
  std::vector<RingElement> s0;
  std::vector<RingElement> s1;
};

// share_0 is drawn uniformly; share_1 is forced by the sum.
SharePair split(std::span<const RingElement> secret, const Ring& ring, CounterPrng& rng);
std::vector<RingElement> combine(std::span<const RingElement> s0, std::span<const RingElement> s1,
                                 const Ring& ring);

SharePair share(std::span<const double> x, const FixedPointCodec& codec, CounterPrng& rng);
// Sums both parties' views and decodes. Throws kShape when the views disagree.
std::vector<double> reconstruct(const SharedTensor& a, const SharedTensor& b,
                                const FixedPointCodec& codec);
std::vector<RingElement> reconstruct_words(const SharedTensor& a, const SharedTensor& b,
                                           const Ring& ring);

// ---------------------------------------------------------------------------
// Correlated randomness. Every struct holds one party's component; the dealer
// hands out both components of each dealing at once.

// n independent triples with c = a * b elementwise.
struct BeaverTriple {
  std::vector<RingElement> a, b, c;
  bool consumed = false;
};

// Batched matrix triple: for each of `batch` slots, C = A (m x k) * B (k x n).
struct MatmulTriple {
  std::size_t batch = 0, m = 0, k = 0, n = 0;
  std::vector<RingElement> a, b, c;
  bool consumed = false;
};

enum class BroadcastAxis { kRows, kCols };

// a is rows x cols; b is one value per row (kRows) or per column (kCols);
// c = a * broadcast(b).
struct BroadcastTriple {
  std::size_t rows = 0, cols = 0;
  BroadcastAxis axis = BroadcastAxis::kRows;
  std::vector<RingElement> a, b, c;
  bool consumed = false;
};

// c = a * a.
struct SquarePair {
  std::vector<RingElement> a, c;
};

// r uniform on [0, 2^(k-1)); hi = r >> shift. Both arithmetic-shared.
struct TruncationPair {
  int shift = 0;
  std::vector<RingElement> r, hi;
};

// XOR-shared word triples with w = u & v (bitwise, ring width).
struct BinaryTriple {
  std::vector<RingElement> u, v, w;
};

// A random bit shared both ways: bits XOR to r, arith sums to r.
struct DaBits {
  std::vector<RingElement> bits, arith;
};

struct DealerCounters {
  std::uint64_t elementwise_triples = 0;
  std::uint64_t matmul_triples = 0;
  std::uint64_t matmul_products = 0;
  std::uint64_t broadcast_triples = 0;
  std::uint64_t square_pairs = 0;
  std::uint64_t truncation_pairs = 0;
  std::uint64_t and_triples = 0;
  std::uint64_t dabits = 0;
  std::uint64_t random_shares = 0;

  bool operator==(const DealerCounters&) const = default;
};

enum class RandomnessKind : std::uint64_t {
  kShares = 1,
  kTriples = 2,
  kTruncation = 3,
  kBinary = 4,
};

// Trusted third-party generator, simulated in-process. Output depends only on
// the seed and the order of requests, never on secrets. Each randomness kind
// draws from its own counter-mode stream.
class TripleDealer {
 public:
  TripleDealer(std::uint64_t seed, Ring ring);

  const Ring& ring() const { return ring_; }

  std::array<BeaverTriple, 2> deal_triples(std::size_t n);
  std::array<MatmulTriple, 2> deal_matmul(std::size_t batch, std::size_t m, std::size_t k,
                                          std::size_t n);
  std::array<BroadcastTriple, 2> deal_broadcast(std::size_t rows, std::size_t cols,
                                                BroadcastAxis axis);
  std::array<SquarePair, 2> deal_squares(std::size_t n);
  std::array<TruncationPair, 2> deal_truncation(std::size_t n, int shift);
  std::array<BinaryTriple, 2> deal_and(std::size_t n);
  std::array<DaBits, 2> deal_dabits(std::size_t n);
  // Fresh sharing of public words from the share stream.
  SharePair random_split(std::span<const RingElement> secret);

  // Caps the number of scalar multiplications (elementwise + matmul products
  // + broadcast + square) the dealer will serve; exceeding it throws kResource.
  void set_product_budget(std::optional<std::uint64_t> budget) { budget_ = budget; }
  const DealerCounters& counters() const { return counters_; }

 private:
  RingElement draw(CounterPrng& s) { return ring_.reduce(s()); }
  void spend(std::uint64_t products);
  std::vector<RingElement> split_into(std::span<const RingElement> secret, CounterPrng& s,
                                      std::vector<RingElement>& other);

  Ring ring_;
  CounterPrng shares_;
  CounterPrng triples_;
  CounterPrng truncation_;
  CounterPrng binary_;
  DealerCounters counters_;
  std::optional<std::uint64_t> budget_;
};

}  // namespace psel
