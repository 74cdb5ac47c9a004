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

#include <doctest.h>

#include <array>
#include <boost/math/special_functions/gamma.hpp>

#include "psel/error.h"
#include "psel/shares.h"
#include "test_util.h"

namespace psel {
namespace {

// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_p(const std::vector<std::size_t>& counts, double expected) {
  double stat = 0.0;
  for (std::size_t c : counts) stat += (c - expected) * (c - expected) / expected;
  return boost::math::gamma_q((counts.size() - 1) / 2.0, stat / 2.0);
}

RingElement word(const std::vector<RingElement>& v0, const std::vector<RingElement>& v1, std::size_t i,
                 const Ring& r) {
  return r.add(v0[i], v1[i]);
}

TEST_SUITE("shares") {
  TEST_CASE("split and combine round trip") {
    const Ring r(64);
    CounterPrng rng(9, 0);
    std::vector<RingElement> secret(100);
    for (std::size_t i = 0; i < secret.size(); ++i) secret[i] = i * 0x9e3779b97f4a7c15ULL;
    const SharePair sp = split(secret, r, rng);
    CHECK(combine(sp.s0, sp.s1, r) == secret);
    CHECK(sp.s0 != secret);
  }

  TEST_CASE("reconstruct decodes and rejects mismatched views") {
    const FixedPointCodec codec(16);
    CounterPrng rng(2, 0);
    const std::vector<double> x{1.25, -3.5, 0.0};
    const SharePair sp = share(x, codec, rng);
    const SharedTensor a{0, {3}, sp.s0}, b{1, {3}, sp.s1};
    CHECK(reconstruct(a, b, codec) == x);
    const SharedTensor bad{1, {1, 3}, sp.s1};
    CHECK_THROWS_AS(reconstruct(a, bad, codec), Error);
  }

  TEST_CASE("shares on the 8-bit ring are uniform") {
    const Ring r(8);
    CounterPrng rng(77, 0);
    const std::vector<RingElement> secret(100000, 42);
    const SharePair sp = split(secret, r, rng);
    std::vector<std::size_t> c0(256), c1(256);
    for (std::size_t i = 0; i < secret.size(); ++i) {
      ++c0[sp.s0[i]];
      ++c1[sp.s1[i]];
    }
    CHECK(chi_square_p(c0, secret.size() / 256.0) > 0.01);
    CHECK(chi_square_p(c1, secret.size() / 256.0) > 0.01);
  }

  TEST_CASE("chi-square detects a biased share source") {
    std::vector<std::size_t> counts(256, 390);
    counts[0] += 256 * 10;
    CHECK(chi_square_p(counts, (256 * 390 + 2560) / 256.0) < 0.01);
  }

  TEST_CASE("Beaver triples satisfy c = a * b in the ring") {
    TripleDealer d(5, Ring(64));
    const auto t = d.deal_triples(1000);
    const Ring& r = d.ring();
    for (std::size_t i = 0; i < 1000; ++i) {
      REQUIRE(r.mul(word(t[0].a, t[1].a, i, r), word(t[0].b, t[1].b, i, r)) == word(t[0].c, t[1].c, i, r));
    }
    CHECK(d.counters().elementwise_triples == 1000);
  }

  TEST_CASE("matmul triples satisfy C = A B per slot") {
    TripleDealer d(6, Ring(64));
    const std::size_t batch = 2, m = 3, k = 4, n = 2;
    const auto t = d.deal_matmul(batch, m, k, n);
    const Ring& r = d.ring();
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          RingElement acc = 0;
          for (std::size_t q = 0; q < k; ++q) {
            acc = r.add(acc, r.mul(word(t[0].a, t[1].a, s * m * k + i * k + q, r),
                                   word(t[0].b, t[1].b, s * k * n + q * n + j, r)));
          }
          CHECK(acc == word(t[0].c, t[1].c, s * m * n + i * n + j, r));
        }
      }
    }
  }

  TEST_CASE("broadcast triples and square pairs") {
    TripleDealer d(7, Ring(64));
    const Ring& r = d.ring();
    const auto bt = d.deal_broadcast(3, 4, BroadcastAxis::kRows);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(r.mul(word(bt[0].a, bt[1].a, i * 4 + j, r), word(bt[0].b, bt[1].b, i, r)) ==
              word(bt[0].c, bt[1].c, i * 4 + j, r));
      }
    }
    const auto sq = d.deal_squares(50);
    for (std::size_t i = 0; i < 50; ++i) {
      const RingElement a = word(sq[0].a, sq[1].a, i, r);
      CHECK(r.mul(a, a) == word(sq[0].c, sq[1].c, i, r));
    }
  }

  TEST_CASE("truncation pairs, AND triples and daBits") {
    TripleDealer d(8, Ring(64));
    const Ring& r = d.ring();
    const auto tp = d.deal_truncation(200, 16);
    for (std::size_t i = 0; i < 200; ++i) {
      const RingElement rv = word(tp[0].r, tp[1].r, i, r);
      CHECK(!r.msb(rv));
      CHECK(word(tp[0].hi, tp[1].hi, i, r) == rv >> 16);
    }
    const auto at = d.deal_and(200);
    for (std::size_t i = 0; i < 200; ++i) {
      CHECK(((at[0].u[i] ^ at[1].u[i]) & (at[0].v[i] ^ at[1].v[i])) == (at[0].w[i] ^ at[1].w[i]));
    }
    const auto db = d.deal_dabits(200);
    for (std::size_t i = 0; i < 200; ++i) {
      const RingElement bit = db[0].bits[i] ^ db[1].bits[i];
      CHECK(bit <= 1);
      CHECK(word(db[0].arith, db[1].arith, i, r) == bit);
    }
  }

  TEST_CASE("the dealer is deterministic per seed") {
    TripleDealer a(11, Ring(64)), b(11, Ring(64)), c(12, Ring(64));
    const auto ta = a.deal_triples(10), tb = b.deal_triples(10), tc = c.deal_triples(10);
    CHECK(ta[0].a == tb[0].a);
    CHECK(ta[1].c == tb[1].c);
    CHECK(ta[0].a != tc[0].a);
  }

  TEST_CASE("product budget is enforced") {
    TripleDealer d(1, Ring(64));
    d.set_product_budget(100);
    CHECK_NOTHROW(d.deal_triples(60));
    try {
      d.deal_triples(60);
      FAIL("expected a resource error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::kResource);
    }
  }
}

}  // namespace
}  // namespace psel
