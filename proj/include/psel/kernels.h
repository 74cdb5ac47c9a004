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

#include "psel/party.h"
#include "psel/shares.h"

// Iterative nonlinear kernels for the no-MLP baseline. Iteration counts come
// from the session's KernelConfig.

namespace psel {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
};

// Convergence domains.
inline constexpr Interval kExpDomain{-16.0, 8.0};
inline constexpr Interval kReciprocalDomain{0x1p-6, 0x1p6};
inline constexpr Interval kRsqrtDomain{0x1p-6, 0x1p6};
inline constexpr Interval kLogDomain{0x1p-6, 0x1p6};

// Each kernel takes the caller's declared bound on its (secret) input. A bound
// outside the kernel's domain is a kDomain error in strict mode; in
// permissive mode the input is securely clamped to the domain first.
//
// exp: (1 + x / 2^n)^(2^n) by repeated squaring.
SharedTensor sec_exp(Party& p, const SharedTensor& x, Interval declared = kExpDomain);
// Newton iteration y <- y (2 - x y) from y0 = 3 exp(1/2 - x) + 0.003.
SharedTensor sec_reciprocal(Party& p, const SharedTensor& x, Interval declared = kReciprocalDomain);
// Newton iteration y <- y (3 - x y^2) / 2 from
// y0 = 2.2 exp(-(x/2 + 0.2)) + 0.2 - x/1024.
SharedTensor sec_rsqrt(Party& p, const SharedTensor& x, Interval declared = kRsqrtDomain);
// Newton iteration y <- y - 1 + x exp(-y) from
// y0 = x/120 - 20 exp(-2x - 1) + 3.
SharedTensor sec_log(Party& p, const SharedTensor& x, Interval declared = kLogDomain);

// lo + relu(x - lo) - relu(x - hi).
SharedTensor sec_clamp(Party& p, const SharedTensor& x, Interval range);

// Row maximum over the last dimension by a comparison tree.
SharedTensor row_max(Party& p, const SharedTensor& x);

// Softmax over the last dimension with max subtraction. Length 1 yields 1.
SharedTensor softmax_baseline(Party& p, const SharedTensor& x);
// Shannon entropy (nats) of softmax over the last dimension, via
// log-sum-exp: H = log S - sum_i p_i z_i with z = x - max.
SharedTensor entropy_baseline(Party& p, const SharedTensor& logits);
// Row-wise LayerNorm of x[rows, dim]; gamma and beta have `dim` entries, or
// are both empty to return the normalized rows without the affine step.
// `variance` is the declared bound on the row variance.
SharedTensor layernorm_baseline(Party& p, const SharedTensor& x, const SharedTensor& gamma,
                                const SharedTensor& beta, double eps,
                                Interval variance = {0x1p-6, 0x1p5});

}  // namespace psel
