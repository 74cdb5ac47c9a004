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
#include <vector>

namespace psel {

// A residue of Z_{2^k}. Stored in the low k bits of a 64-bit word; the upper
// bits are always zero for k < 64.
using RingElement = std::uint64_t;

// Z_{2^k} for k in [2, 64]. k = 64 is the production ring; k = 8 is the
// mini-ring used for exhaustive tests.
class Ring {
 public:
  constexpr Ring() = default;
  explicit Ring(int bits);

  int bits() const { return bits_; }
  RingElement mask() const { return mask_; }
  // Number of distinct residues as a double (2^k).
  double cardinality() const;

  RingElement reduce(std::uint64_t v) const { return v & mask_; }
  RingElement add(RingElement a, RingElement b) const { return (a + b) & mask_; }
  RingElement sub(RingElement a, RingElement b) const { return (a - b) & mask_; }
  RingElement mul(RingElement a, RingElement b) const { return (a * b) & mask_; }
  RingElement neg(RingElement a) const { return (~a + 1) & mask_; }

  // Two's-complement interpretation in [-2^(k-1), 2^(k-1)).
  std::int64_t to_signed(RingElement a) const;
  RingElement from_signed(std::int64_t v) const { return static_cast<RingElement>(v) & mask_; }
  bool msb(RingElement a) const { return (a >> (bits_ - 1)) & 1U; }

  bool operator==(const Ring&) const = default;

 private:
  int bits_ = 64;
  RingElement mask_ = ~RingElement{0};
};

// Fixed-point codec: a real x is carried as round(x * 2^f).
class FixedPointCodec {
 public:
  explicit FixedPointCodec(int frac_bits = 16, Ring ring = Ring{});

  int frac_bits() const { return frac_bits_; }
  const Ring& ring() const { return ring_; }
  double scale() const { return scale_; }
  // Exclusive bound on |x| accepted by encode: 2^(k - f - 2).
  double limit() const { return limit_; }
  // One unit in the last place, 2^-f.
  double ulp() const { return 1.0 / scale_; }

  RingElement encode(double x) const;
  double decode(RingElement r) const;

  std::vector<RingElement> encode(std::span<const double> xs) const;
  std::vector<double> decode(std::span<const RingElement> rs) const;

  bool operator==(const FixedPointCodec&) const = default;

 private:
  int frac_bits_;
  Ring ring_;
  double scale_;
  double limit_;
};

// out[m x n] (+)= a[m x k] * b[k x n] over the ring, row-major.
void ring_matmul(const Ring& ring, std::span<const RingElement> a, std::span<const RingElement> b,
                 std::span<RingElement> out, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate = false);

}  // namespace psel
