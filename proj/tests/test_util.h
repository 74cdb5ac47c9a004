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

#include <cmath>
#include <random>
#include <vector>

#include "psel/party.h"
#include "psel/protocols.h"
#include "psel/shares.h"

namespace psel::testing {

inline SessionConfig session(std::uint64_t seed = 1) {
  SessionConfig c;
  c.seed = seed;
  return c;
}

// 8-bit ring with integer encoding, for exhaustive checks.
inline SessionConfig mini_session(std::uint64_t seed = 1) {
  SessionConfig c;
  c.ring_bits = 8;
  c.frac_bits = 0;
  c.seed = seed;
  return c;
}

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> out(n);
  for (double& x : out) x = d(rng);
  return out;
}

inline std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

template <class R>
std::vector<double> open(const TwoPartyRun<R>& run, const SessionConfig& cfg) {
  return reconstruct(run.out[0], run.out[1], cfg.codec());
}

template <class R>
std::vector<RingElement> open_words(const TwoPartyRun<R>& run, const SessionConfig& cfg) {
  return reconstruct_words(run.out[0], run.out[1], Ring(cfg.ring_bits));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace psel::testing
