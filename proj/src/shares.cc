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

#include "psel/shares.h"

#include <sstream>

#include "psel/error.h"

namespace psel {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

SharePair split(std::span<const RingElement> secret, const Ring& ring, CounterPrng& rng) {
  SharePair out;
  out.s0.resize(secret.size());
  out.s1.resize(secret.size());
  for (std::size_t i = 0; i < secret.size(); ++i) {
    out.s0[i] = ring.reduce(rng());
    out.s1[i] = ring.sub(secret[i], out.s0[i]);
  }
  return out;
}

std::vector<RingElement> combine(std::span<const RingElement> s0, std::span<const RingElement> s1,
                                 const Ring& ring) {
  PSEL_ENFORCE(s0.size() == s1.size(), kShape,
               "share length mismatch " << s0.size() << " vs " << s1.size());
  std::vector<RingElement> out(s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) out[i] = ring.add(s0[i], s1[i]);
  return out;
}

SharePair share(std::span<const double> x, const FixedPointCodec& codec, CounterPrng& rng) {
  const auto encoded = codec.encode(x);
  return split(encoded, codec.ring(), rng);
}

std::vector<RingElement> reconstruct_words(const SharedTensor& a, const SharedTensor& b,
                                           const Ring& ring) {
  PSEL_ENFORCE(a.shape == b.shape, kShape,
               "parties disagree on shape " << shape_str(a.shape) << " vs " << shape_str(b.shape));
  PSEL_ENFORCE(a.party != b.party, kShape, "both views come from party " << a.party);
  return combine(a.share, b.share, ring);
}

std::vector<double> reconstruct(const SharedTensor& a, const SharedTensor& b,
                                const FixedPointCodec& codec) {
  return codec.decode(reconstruct_words(a, b, codec.ring()));
}

// ---------------------------------------------------------------------------

TripleDealer::TripleDealer(std::uint64_t seed, Ring ring)
    : ring_(ring),
      shares_(seed, static_cast<std::uint64_t>(RandomnessKind::kShares)),
      triples_(seed, static_cast<std::uint64_t>(RandomnessKind::kTriples)),
      truncation_(seed, static_cast<std::uint64_t>(RandomnessKind::kTruncation)),
      binary_(seed, static_cast<std::uint64_t>(RandomnessKind::kBinary)) {}

void TripleDealer::spend(std::uint64_t products) {
  if (!budget_) return;
  const std::uint64_t used = counters_.elementwise_triples + counters_.matmul_products +
                             counters_.broadcast_triples + counters_.square_pairs;
  PSEL_ENFORCE(used + products <= *budget_, kResource,
               "triple budget exhausted: " << used << " used, " << products << " requested, budget "
                                           << *budget_);
}

std::vector<RingElement> TripleDealer::split_into(std::span<const RingElement> secret,
                                                  CounterPrng& s, std::vector<RingElement>& other) {
  std::vector<RingElement> first(secret.size());
  other.resize(secret.size());
  for (std::size_t i = 0; i < secret.size(); ++i) {
    first[i] = draw(s);
    other[i] = ring_.sub(secret[i], first[i]);
  }
  return first;
}

std::array<BeaverTriple, 2> TripleDealer::deal_triples(std::size_t n) {
  spend(n);
  std::vector<RingElement> a(n), b(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = draw(triples_);
    b[i] = draw(triples_);
    c[i] = ring_.mul(a[i], b[i]);
  }
  std::array<BeaverTriple, 2> out;
  out[0].a = split_into(a, triples_, out[1].a);
  out[0].b = split_into(b, triples_, out[1].b);
  out[0].c = split_into(c, triples_, out[1].c);
  counters_.elementwise_triples += n;
  return out;
}

std::array<MatmulTriple, 2> TripleDealer::deal_matmul(std::size_t batch, std::size_t m,
                                                      std::size_t k, std::size_t n) {
  spend(batch * m * k * n);
  std::vector<RingElement> a(batch * m * k), b(batch * k * n), c(batch * m * n);
  for (auto& v : a) v = draw(triples_);
  for (auto& v : b) v = draw(triples_);
  for (std::size_t s = 0; s < batch; ++s) {
    ring_matmul(ring_, std::span(a).subspan(s * m * k, m * k), std::span(b).subspan(s * k * n, k * n),
                std::span(c).subspan(s * m * n, m * n), m, k, n);
  }
  std::array<MatmulTriple, 2> out;
  for (auto& t : out) {
    t.batch = batch;
    t.m = m;
    t.k = k;
    t.n = n;
  }
  out[0].a = split_into(a, triples_, out[1].a);
  out[0].b = split_into(b, triples_, out[1].b);
  out[0].c = split_into(c, triples_, out[1].c);
  counters_.matmul_triples += batch;
  counters_.matmul_products += batch * m * k * n;
  return out;
}

std::array<BroadcastTriple, 2> TripleDealer::deal_broadcast(std::size_t rows, std::size_t cols,
                                                            BroadcastAxis axis) {
  spend(rows * cols);
  const std::size_t nb = axis == BroadcastAxis::kRows ? rows : cols;
  std::vector<RingElement> a(rows * cols), b(nb), c(rows * cols);
  for (auto& v : a) v = draw(triples_);
  for (auto& v : b) v = draw(triples_);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const RingElement bv = axis == BroadcastAxis::kRows ? b[i] : b[j];
      c[i * cols + j] = ring_.mul(a[i * cols + j], bv);
    }
  }
  std::array<BroadcastTriple, 2> out;
  for (auto& t : out) {
    t.rows = rows;
    t.cols = cols;
    t.axis = axis;
  }
  out[0].a = split_into(a, triples_, out[1].a);
  out[0].b = split_into(b, triples_, out[1].b);
  out[0].c = split_into(c, triples_, out[1].c);
  counters_.broadcast_triples += rows * cols;
  return out;
}

std::array<SquarePair, 2> TripleDealer::deal_squares(std::size_t n) {
  spend(n);
  std::vector<RingElement> a(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = draw(triples_);
    c[i] = ring_.mul(a[i], a[i]);
  }
  std::array<SquarePair, 2> out;
  out[0].a = split_into(a, triples_, out[1].a);
  out[0].c = split_into(c, triples_, out[1].c);
  counters_.square_pairs += n;
  return out;
}

std::array<TruncationPair, 2> TripleDealer::deal_truncation(std::size_t n, int shift) {
  PSEL_ENFORCE(shift >= 0 && shift <= ring_.bits() - 2, kConfig,
               "truncation shift " << shift << " invalid for " << ring_.bits() << "-bit ring");
  const RingElement half_mask = ring_.mask() >> 1;
  std::vector<RingElement> r(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = truncation_() & half_mask;
    hi[i] = r[i] >> shift;
  }
  std::array<TruncationPair, 2> out;
  out[0].shift = out[1].shift = shift;
  out[0].r = split_into(r, truncation_, out[1].r);
  out[0].hi = split_into(hi, truncation_, out[1].hi);
  counters_.truncation_pairs += n;
  return out;
}

std::array<BinaryTriple, 2> TripleDealer::deal_and(std::size_t n) {
  std::array<BinaryTriple, 2> out;
  for (auto& t : out) {
    t.u.resize(n);
    t.v.resize(n);
    t.w.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const RingElement u = draw(binary_);
    const RingElement v = draw(binary_);
    const RingElement w = u & v;
    out[0].u[i] = draw(binary_);
    out[0].v[i] = draw(binary_);
    out[0].w[i] = draw(binary_);
    out[1].u[i] = u ^ out[0].u[i];
    out[1].v[i] = v ^ out[0].v[i];
    out[1].w[i] = w ^ out[0].w[i];
  }
  counters_.and_triples += n;
  return out;
}

std::array<DaBits, 2> TripleDealer::deal_dabits(std::size_t n) {
  std::array<DaBits, 2> out;
  for (auto& t : out) {
    t.bits.resize(n);
    t.arith.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const RingElement r = binary_() & 1U;
    out[0].bits[i] = binary_() & 1U;
    out[1].bits[i] = r ^ out[0].bits[i];
    out[0].arith[i] = draw(binary_);
    out[1].arith[i] = ring_.sub(r, out[0].arith[i]);
  }
  counters_.dabits += n;
  return out;
}

SharePair TripleDealer::random_split(std::span<const RingElement> secret) {
  counters_.random_shares += secret.size();
  return split(secret, ring_, shares_);
}

}  // namespace psel
