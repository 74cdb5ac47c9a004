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

#include <cmath>

#include "psel/error.h"
#include "psel/protocols.h"
#include "test_util.h"

namespace psel {
namespace {

using testing::open;
using testing::open_words;

// Every signed value of the 8-bit ring, as ring words.
std::vector<RingElement> all_words() {
  std::vector<RingElement> w(256);
  for (int i = 0; i < 256; ++i) w[i] = static_cast<RingElement>(i);
  return w;
}

// Both operands of every pair in [lo, hi)^2, flattened.
void all_pairs(int lo, int hi, std::vector<double>& a, std::vector<double>& b) {
  for (int x = lo; x < hi; ++x) {
    for (int y = lo; y < hi; ++y) {
      a.push_back(x);
      b.push_back(y);
    }
  }
}

TEST_SUITE("protocols") {
  TEST_CASE("addition and public operations are exact") {
    const auto cfg = testing::session();
    const auto x = testing::uniform(1000, -100, 100, 1), y = testing::uniform(1000, -100, 100, 2);
    auto run = run_two_party(cfg, [&](Party& p) {
      const auto a = input(p, 0, {1000}, p.id() == 0 ? x : std::vector<double>{});
      const auto b = input(p, 1, {1000}, p.id() == 1 ? y : std::vector<double>{});
      return std::vector<SharedTensor>{add(p, a, b), sub(p, a, b), add_public(p, a, 2.5), mul_int(p, a, -3)};
    });
    const auto codec = cfg.codec();
    const auto sum = reconstruct(run.out[0][0], run.out[1][0], codec);
    const auto diff = reconstruct(run.out[0][1], run.out[1][1], codec);
    const auto shifted = reconstruct(run.out[0][2], run.out[1][2], codec);
    const auto tripled = reconstruct(run.out[0][3], run.out[1][3], codec);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double ex = codec.decode(codec.encode(x[i])), ey = codec.decode(codec.encode(y[i]));
      CHECK(sum[i] == ex + ey);
      CHECK(diff[i] == ex - ey);
      CHECK(shifted[i] == ex + 2.5);
      CHECK(tripled[i] == -3 * ex);
    }
    CHECK(run.ledgers[0].total().rounds == 2);
  }

  TEST_CASE("addition and multiplication are exact on the 8-bit ring") {
    const auto cfg = testing::mini_session();
    std::vector<double> a, b;
    all_pairs(-8, 8, a, b);
    auto run = run_two_party(cfg, [&](Party& p) {
      const auto x = input(p, 0, {a.size()}, p.id() == 0 ? a : std::vector<double>{});
      const auto y = input(p, 1, {b.size()}, p.id() == 1 ? b : std::vector<double>{});
      return std::vector<SharedTensor>{add(p, x, y), mul_raw(p, x, y)};
    });
    const Ring r(8);
    const auto sums = reconstruct_words(run.out[0][0], run.out[1][0], r);
    const auto prods = reconstruct_words(run.out[0][1], run.out[1][1], r);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(r.to_signed(sums[i]) == static_cast<int>(a[i] + b[i]));
      CHECK(r.to_signed(prods[i]) == static_cast<int>(a[i] * b[i]));
    }
  }

  TEST_CASE("fixed-point multiplication stays within the encoding bound") {
    const auto cfg = testing::session(4);
    const auto x = testing::uniform(1000, -10, 10, 3), y = testing::uniform(1000, -10, 10, 4);
    auto run = run_two_party(cfg, [&](Party& p) {
      return mul(p, input(p, 0, {1000}, p.id() == 0 ? x : std::vector<double>{}),
                 input(p, 1, {1000}, p.id() == 1 ? y : std::vector<double>{}));
    });
    const auto z = open(run, cfg);
    const double ulp = cfg.codec().ulp();
    for (std::size_t i = 0; i < x.size(); ++i) {
      // Encoding error of each operand times the other, plus one truncation unit.
      const double bound = (std::fabs(x[i]) + std::fabs(y[i])) * ulp / 2 + ulp * ulp / 4 + 2 * ulp;
      REQUIRE(std::fabs(z[i] - x[i] * y[i]) <= bound);
    }
    CHECK(run.ledgers[0].total().rounds == 4);  // two inputs, Beaver open, truncation
  }

  TEST_CASE("square, broadcast multiply and public scaling") {
    const auto cfg = testing::session(5);
    const auto x = testing::uniform(12, -4, 4, 5), v = testing::uniform(3, -2, 2, 6);
    auto run = run_two_party(cfg, [&](Party& p) {
      const auto a = input(p, 0, {3, 4}, p.id() == 0 ? x : std::vector<double>{});
      const auto b = input(p, 0, {3}, p.id() == 0 ? v : std::vector<double>{});
      return std::vector<SharedTensor>{square(p, a), mul_broadcast(p, a, b, BroadcastAxis::kRows),
                                       mul_public(p, a, 0.375), sum_last(p, a)};
    });
    const auto codec = cfg.codec();
    const auto sq = reconstruct(run.out[0][0], run.out[1][0], codec);
    const auto bc = reconstruct(run.out[0][1], run.out[1][1], codec);
    const auto sc = reconstruct(run.out[0][2], run.out[1][2], codec);
    const auto sm = reconstruct(run.out[0][3], run.out[1][3], codec);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(std::fabs(sq[i] - x[i] * x[i]) < 1e-3);
      CHECK(std::fabs(bc[i] - x[i] * v[i / 4]) < 1e-3);
      CHECK(std::fabs(sc[i] - 0.375 * x[i]) < 1e-4);
    }
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(std::fabs(sm[r] - (x[4 * r] + x[4 * r + 1] + x[4 * r + 2] + x[4 * r + 3])) < 1e-4);
    }
  }

  TEST_CASE("matmul matches the plaintext product") {
    const auto cfg = testing::session(6);
    const std::size_t m = 20, k = 30, n = 10;
    const auto a = testing::uniform(m * k, -3, 3, 7), b = testing::uniform(k * n, -3, 3, 8);
    auto run = run_two_party(cfg, [&](Party& p) {
      return matmul(p, input(p, 0, {m, k}, p.id() == 0 ? a : std::vector<double>{}),
                    input(p, 1, {k, n}, p.id() == 1 ? b : std::vector<double>{}));
    });
    const auto c = open(run, cfg);
    const double ulp = cfg.codec().ulp();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0, mag = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          ref += a[i * k + t] * b[t * n + j];
          mag += std::fabs(a[i * k + t]) + std::fabs(b[t * n + j]);
        }
        REQUIRE(std::fabs(c[i * n + j] - ref) <= mag * ulp / 2 + k * ulp * ulp + 2 * ulp);
      }
    }
  }

  TEST_CASE("batched matmul over three slots") {
    const auto cfg = testing::session(7);
    const auto a = testing::uniform(3 * 2 * 4, -1, 1, 9), b = testing::uniform(3 * 4 * 5, -1, 1, 10);
    auto run = run_two_party(cfg, [&](Party& p) {
      return matmul(p, input(p, 0, {3, 2, 4}, p.id() == 0 ? a : std::vector<double>{}),
                    input(p, 0, {3, 4, 5}, p.id() == 0 ? b : std::vector<double>{}));
    });
    const auto c = open(run, cfg);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          double ref = 0.0;
          for (std::size_t t = 0; t < 4; ++t) ref += a[s * 8 + i * 4 + t] * b[s * 20 + t * 5 + j];
          CHECK(std::fabs(c[s * 10 + i * 5 + j] - ref) < 1e-3);
        }
  }

  TEST_CASE("truncation errs by at most one unit") {
    SUBCASE("random values on the 64-bit ring") {
      const auto cfg = testing::session(8);
      const auto x = testing::uniform(1000, -1e4, 1e4, 11);
      auto run = run_two_party(cfg, [&](Party& p) {
        const auto a = input(p, 0, {1000}, p.id() == 0 ? x : std::vector<double>{});
        return truncate(p, mul_int(p, a, 1 << 16), 16);
      });
      const auto y = open(run, cfg);
      const double ulp = cfg.codec().ulp();
      for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::fabs(y[i] - x[i]) <= ulp * 1.5);
    }
    SUBCASE("every admissible value on the 8-bit ring") {
      const auto cfg = testing::mini_session(9);
      std::vector<double> x;
      for (int v = -63; v < 64; ++v) x.push_back(v);
      for (int shift : {1, 2, 3}) {
        auto run = run_two_party(cfg, [&](Party& p) {
          return truncate(p, input(p, 0, {x.size()}, p.id() == 0 ? x : std::vector<double>{}), shift);
        });
        const Ring r(8);
        const auto w = open_words(run, cfg);
        for (std::size_t i = 0; i < x.size(); ++i) {
          REQUIRE(std::fabs(r.to_signed(w[i]) - x[i] / (1 << shift)) <= 1.0);
        }
      }
    }
  }

  TEST_CASE("msb is exact over the whole 8-bit ring") {
    const auto cfg = testing::mini_session(10);
    const auto words = all_words();
    auto run = run_two_party(cfg, [&](Party& p) {
      return msb(p, input_words(p, 0, {256}, p.id() == 0 ? words : std::vector<RingElement>{}));
    });
    const auto bits = open_words(run, cfg);
    const Ring r(8);
    for (int i = 0; i < 256; ++i) REQUIRE(bits[i] == static_cast<RingElement>(r.msb(i)));
  }

  TEST_CASE("msb on random 64-bit values") {
    const auto cfg = testing::session(11);
    const auto x = testing::uniform(1000, -1e9, 1e9, 12);
    auto run = run_two_party(cfg, [&](Party& p) {
      return msb(p, input(p, 1, {1000}, p.id() == 1 ? x : std::vector<double>{}));
    });
    const auto bits = open_words(run, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double encoded = cfg.codec().decode(cfg.codec().encode(x[i]));
      REQUIRE(bits[i] == (encoded < 0 ? 1U : 0U));
    }
  }

  TEST_CASE("relu is exact on the 8-bit ring and within an ulp on random values") {
    {
      const auto cfg = testing::mini_session(12);
      const auto words = all_words();
      auto run = run_two_party(cfg, [&](Party& p) {
        return relu(p, input_words(p, 0, {256}, p.id() == 0 ? words : std::vector<RingElement>{}));
      });
      const auto out = open_words(run, cfg);
      const Ring r(8);
      for (int i = 0; i < 256; ++i) REQUIRE(r.to_signed(out[i]) == std::max<std::int64_t>(r.to_signed(i), 0));
    }
    const auto cfg = testing::session(13);
    const auto x = testing::uniform(1000, -50, 50, 13);
    auto run = run_two_party(cfg, [&](Party& p) {
      return relu(p, input(p, 0, {1000}, p.id() == 0 ? x : std::vector<double>{}));
    });
    const auto y = open(run, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::fabs(y[i] - std::max(x[i], 0.0)) <= cfg.codec().ulp());
  }

  TEST_CASE("comparison agrees with plaintext and is charged by the cost model") {
    const auto cfg = testing::session(14);
    auto a = testing::uniform(1000, -100, 100, 15), b = testing::uniform(1000, -100, 100, 16);
    const double gap = 2 * cfg.codec().ulp();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::fabs(a[i] - b[i]) <= gap) b[i] = a[i] + 2 * gap;
    }
    auto run = run_two_party(cfg, [&](Party& p) {
      const auto x = input(p, 0, {1000}, p.id() == 0 ? a : std::vector<double>{});
      const auto y = input(p, 1, {1000}, p.id() == 1 ? b : std::vector<double>{});
      TagScope t(p, "cmp");
      return compare_open(p, x, y);
    });
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(run.out[0][i] == (a[i] < b[i] ? 1 : 0));
    CHECK(run.out[0] == run.out[1]);
    const TagCost c = run.ledgers[0].tags().at("cmp");
    CHECK(c.rounds == 8);
    CHECK(c.bytes == 432 * 1000);
    const TagCost real = run.ledgers[0].analytic().at("cmp");
    const ProtocolCost analytic = compare_analytic_cost(64);
    CHECK(real.rounds == analytic.rounds);
    CHECK(real.bytes == analytic.bytes * 1000);
    CHECK(run.reveals[0].count(RevealKind::kComparisonBit) == 1000);
    CHECK(run.reveals[0].audit());
  }

  TEST_CASE("comparison is exact for every pair on the 8-bit ring") {
    const auto cfg = testing::mini_session(15);
    std::vector<double> a, b;
    all_pairs(-32, 32, a, b);
    auto run = run_two_party(cfg, [&](Party& p) {
      return compare_open(p, input(p, 0, {a.size()}, p.id() == 0 ? a : std::vector<double>{}),
                          input(p, 1, {b.size()}, p.id() == 1 ? b : std::vector<double>{}));
    });
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(run.out[0][i] == (a[i] < b[i] ? 1 : 0));
  }

  TEST_CASE("model charging can be switched off") {
    auto cfg = testing::session(16);
    cfg.comparison.use_model = false;
    auto run = run_two_party(cfg, [&](Party& p) {
      const std::vector<double> v{1, 2, 3};
      return compare_open(p, constant(p, {3}, 2.0), public_tensor(p, {3}, v));
    });
    CHECK(run.out[0] == std::vector<std::uint8_t>{0, 0, 1});
    const ProtocolCost analytic = compare_analytic_cost(64);
    CHECK(run.ledgers[0].total().rounds == analytic.rounds);
    CHECK(run.ledgers[0].total().bytes == analytic.bytes * 3);
    CHECK(run.ledgers[0].analytic().empty());
  }

  TEST_CASE("select picks by a shared bit") {
    const auto cfg = testing::session(17);
    auto run = run_two_party(cfg, [&](Party& p) {
      const std::vector<double> bits{1, 0, 1}, a{1.5, 2.5, -3}, b{9, 8, 7};
      const auto bit = input_words(p, 0, {3}, p.id() == 0 ? std::vector<RingElement>{1, 0, 1}
                                                          : std::vector<RingElement>{});
      return select(p, bit, input(p, 0, {3}, p.id() == 0 ? a : std::vector<double>{}),
                    input(p, 1, {3}, p.id() == 1 ? b : std::vector<double>{}));
    });
    CHECK(open(run, cfg) == std::vector<double>{1.5, 8, -3});
  }

  TEST_CASE("opening logs the values under the requested kind") {
    const auto cfg = testing::session(18);
    auto run = run_two_party(cfg, [&](Party& p) {
      const std::vector<double> v{4, 5};
      return reveal(p, input(p, 0, {2}, p.id() == 0 ? v : std::vector<double>{}), RevealKind::kIntermediate,
                    "debug");
    });
    CHECK(run.out[1] == std::vector<double>{4, 5});
    CHECK_FALSE(run.reveals[0].audit());
  }

  TEST_CASE("shape mismatches are rejected") {
    const auto cfg = testing::session(19);
    CHECK_THROWS_AS(run_two_party(cfg,
                                  [](Party& p) {
                                    return add(p, zeros(p, {2, 3}), zeros(p, {3, 2}));
                                  }),
                    Error);
  }

  TEST_CASE("layout helpers are local") {
    const auto cfg = testing::session(20);
    auto run = run_two_party(cfg, [](Party& p) {
      const std::vector<double> v{0, 1, 2, 3, 4, 5};
      const auto x = public_tensor(p, {2, 3}, v);
      const std::vector<std::size_t> rows{1, 0};
      const std::vector<SharedTensor> parts{transpose_last(x), slice_cols(transpose_last(x), 0, 1)};
      return std::vector<SharedTensor>{transpose_last(x), slice_cols(x, 1, 3), gather_rows(x, rows),
                                       concat_cols(parts), concat_rows(std::vector<SharedTensor>{x, x})};
    });
    const auto codec = cfg.codec();
    CHECK(reconstruct(run.out[0][0], run.out[1][0], codec) == std::vector<double>{0, 3, 1, 4, 2, 5});
    CHECK(reconstruct(run.out[0][1], run.out[1][1], codec) == std::vector<double>{1, 2, 4, 5});
    CHECK(reconstruct(run.out[0][2], run.out[1][2], codec) == std::vector<double>{3, 4, 5, 0, 1, 2});
    CHECK(reconstruct(run.out[0][3], run.out[1][3], codec) == std::vector<double>{0, 3, 0, 1, 4, 1, 2, 5, 2});
    CHECK(run.out[0][4].shape == Shape{4, 3});
    CHECK(run.ledgers[0].total().rounds == 0);
  }
}

}  // namespace
}  // namespace psel
