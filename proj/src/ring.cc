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

#include "psel/ring.h"

#include <algorithm>
#include <cmath>

#include "psel/error.h"

namespace psel {

Ring::Ring(int bits) : bits_(bits) {
  PSEL_ENFORCE(bits >= 2 && bits <= 64, kConfig, "ring bit width " << bits << " outside [2, 64]");
  mask_ = bits == 64 ? ~RingElement{0} : ((RingElement{1} << bits) - 1);
}

double Ring::cardinality() const { return std::ldexp(1.0, bits_); }

std::int64_t Ring::to_signed(RingElement a) const {
  if (bits_ == 64) return static_cast<std::int64_t>(a);
  const int shift = 64 - bits_;
  return static_cast<std::int64_t>(a << shift) >> shift;
}

FixedPointCodec::FixedPointCodec(int frac_bits, Ring ring)
    : frac_bits_(frac_bits), ring_(ring) {
  PSEL_ENFORCE(frac_bits >= 0 && frac_bits <= ring.bits() - 2, kConfig,
               "fractional bits " << frac_bits << " do not fit a " << ring.bits() << "-bit ring");
  scale_ = std::ldexp(1.0, frac_bits);
  limit_ = std::ldexp(1.0, ring.bits() - frac_bits - 2);
}

RingElement FixedPointCodec::encode(double x) const {
  PSEL_ENFORCE(std::isfinite(x) && std::fabs(x) < limit_, kEncode,
               "value " << x << " outside fixed-point range (|x| < " << limit_ << ")");
  return ring_.from_signed(std::llround(x * scale_));
}

double FixedPointCodec::decode(RingElement r) const {
  return static_cast<double>(ring_.to_signed(r)) / scale_;
}

std::vector<RingElement> FixedPointCodec::encode(std::span<const double> xs) const {
  std::vector<RingElement> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = encode(xs[i]);
  return out;
}

std::vector<double> FixedPointCodec::decode(std::span<const RingElement> rs) const {
  std::vector<double> out(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) out[i] = decode(rs[i]);
  return out;
}

void ring_matmul(const Ring& ring, std::span<const RingElement> a, std::span<const RingElement> b,
                 std::span<RingElement> out, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate) {
  if (!accumulate) std::fill(out.begin(), out.end(), RingElement{0});
  for (std::size_t i = 0; i < m; ++i) {
    RingElement* row = out.data() + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const RingElement av = a[i * k + t];
      if (av == 0) continue;
      const RingElement* brow = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  if (ring.bits() < 64) {
    for (auto& v : out) v = ring.reduce(v);
  }
}

}  // namespace psel
