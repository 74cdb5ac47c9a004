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

#include "psel/kernels.h"

#include <cmath>

#include "psel/error.h"
#include "psel/protocols.h"

namespace psel {

namespace {

// Applies the domain policy; returns the tensor the kernel should consume.
SharedTensor admit(Party& p, const SharedTensor& x, Interval declared, Interval domain,
                   std::string_view kernel) {
  if (domain.contains(declared)) return x;
  PSEL_ENFORCE(p.config().kernels.domain == DomainMode::kPermissive, kDomain,
               kernel << ": declared input range [" << declared.lo << ", " << declared.hi
                      << "] leaves the convergence domain [" << domain.lo << ", " << domain.hi << "]");
  return sec_clamp(p, x, domain);
}

// Accurate in absolute terms for x in [-2^n, 8]; below -2^n the base turns
// negative.
SharedTensor exp_raw(Party& p, const SharedTensor& x) {
  const int n = p.config().kernels.exp_iters;
  SharedTensor y = add_public(p, truncate(p, x, n), 1.0);
  for (int i = 0; i < n; ++i) y = square(p, y);
  return y;
}

SharedTensor reciprocal_raw(Party& p, const SharedTensor& x) {
  SharedTensor y = add_public(p, mul_int(p, exp_raw(p, add_public(p, neg(p, x), 0.5)), 3), 0.003);
  for (int i = 0; i < p.config().kernels.reciprocal_iters; ++i) {
    const SharedTensor xy = mul(p, x, y);
    y = mul(p, y, add_public(p, neg(p, xy), 2.0));
  }
  return y;
}

SharedTensor rsqrt_raw(Party& p, const SharedTensor& x) {
  const int f = p.codec().frac_bits();
  const SharedTensor arg = add_public(p, neg(p, truncate(p, x, 1)), -0.2);
  SharedTensor y = add_public(p, mul_public(p, exp_raw(p, arg), 2.2), 0.2);
  y = sub(p, y, truncate(p, x, 10));
  for (int i = 0; i < p.config().kernels.rsqrt_iters; ++i) {
    const SharedTensor xy2 = mul(p, x, square(p, y));
    y = truncate(p, mul_raw(p, y, add_public(p, neg(p, xy2), 3.0)), f + 1);
  }
  return y;
}

SharedTensor log_raw(Party& p, const SharedTensor& x) {
  const SharedTensor e = exp_raw(p, add_public(p, mul_int(p, x, -2), -1.0));
  SharedTensor y = add_public(p, sub(p, mul_public(p, x, 1.0 / 120.0), mul_int(p, e, 20)), 3.0);
  for (int i = 0; i < p.config().kernels.log_iters; ++i) {
    const SharedTensor t = mul(p, x, exp_raw(p, neg(p, y)));
    y = add(p, add_public(p, y, -1.0), t);
  }
  return y;
}

// Row-wise view [rows, n] of a tensor whose last dimension is n.
std::size_t rows_of(const SharedTensor& x) {
  PSEL_ENFORCE(!x.shape.empty() && x.shape.back() > 0, kShape,
               "row operation needs a nonempty last dimension, got " << shape_str(x.shape));
  return x.size() / x.shape.back();
}

// Extra right shift keeping a row sum of n values in [1, n] under 2^6.
int sum_shift(std::size_t n) {
  int bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  return std::max(0, bits - 6);
}

}  // namespace

SharedTensor sec_exp(Party& p, const SharedTensor& x, Interval declared) {
  return exp_raw(p, admit(p, x, declared, kExpDomain, "exp"));
}

SharedTensor sec_reciprocal(Party& p, const SharedTensor& x, Interval declared) {
  return reciprocal_raw(p, admit(p, x, declared, kReciprocalDomain, "reciprocal"));
}

SharedTensor sec_rsqrt(Party& p, const SharedTensor& x, Interval declared) {
  return rsqrt_raw(p, admit(p, x, declared, kRsqrtDomain, "rsqrt"));
}

SharedTensor sec_log(Party& p, const SharedTensor& x, Interval declared) {
  return log_raw(p, admit(p, x, declared, kLogDomain, "log"));
}

SharedTensor sec_clamp(Party& p, const SharedTensor& x, Interval range) {
  const SharedTensor lo = add_public(p, x, -range.lo);
  const SharedTensor hi = add_public(p, x, -range.hi);
  const SharedTensor both[] = {reshape(lo, {lo.size()}), reshape(hi, {hi.size()})};
  const SharedTensor r = relu(p, concat_rows(both));
  const std::size_t n = x.size();
  SharedTensor out = x;
  for (std::size_t i = 0; i < n; ++i) out.share[i] = p.ring().sub(r.share[i], r.share[n + i]);
  return add_public(p, out, range.lo);
}

SharedTensor row_max(Party& p, const SharedTensor& x) {
  const std::size_t rows = rows_of(x);
  SharedTensor cur = reshape(x, {rows, x.shape.back()});
  while (cur.shape[1] > 1) {
    const std::size_t width = cur.shape[1], half = width / 2;
    const SharedTensor a = slice_cols(cur, 0, half);
    const SharedTensor b = slice_cols(cur, half, 2 * half);
    const SharedTensor a_lt_b = msb(p, sub(p, a, b));
    SharedTensor m = select(p, a_lt_b, b, a);
    if (width % 2) {
      const SharedTensor parts[] = {m, slice_cols(cur, width - 1, width)};
      m = concat_cols(parts);
    }
    cur = std::move(m);
  }
  return reshape(cur, {rows});
}

SharedTensor softmax_baseline(Party& p, const SharedTensor& x) {
  const std::size_t n = x.shape.empty() ? 0 : x.shape.back();
  const std::size_t rows = rows_of(x);
  if (n == 1) return constant(p, x.shape, 1.0);
  const SharedTensor flat = reshape(x, {rows, n});
  const SharedTensor z = add_broadcast(p, flat, neg(p, row_max(p, flat)), BroadcastAxis::kRows);
  const SharedTensor e = exp_raw(p, z);
  const int shift = sum_shift(n);
  const SharedTensor s = truncate(p, sum_last(p, e), shift);
  const SharedTensor r = reciprocal_raw(p, s);
  const SharedTensor out = truncate(p, mul_broadcast_raw(p, e, r, BroadcastAxis::kRows),
                                    p.codec().frac_bits() + shift);
  return reshape(out, x.shape);
}

SharedTensor entropy_baseline(Party& p, const SharedTensor& logits) {
  const std::size_t n = logits.shape.empty() ? 0 : logits.shape.back();
  const std::size_t rows = rows_of(logits);
  if (n == 1) return zeros(p, {rows});
  const SharedTensor flat = reshape(logits, {rows, n});
  const SharedTensor z = add_broadcast(p, flat, neg(p, row_max(p, flat)), BroadcastAxis::kRows);
  const SharedTensor e = exp_raw(p, z);
  const int shift = sum_shift(n);
  const SharedTensor s = truncate(p, sum_last(p, e), shift);
  SharedTensor log_s = log_raw(p, s);
  if (shift > 0) log_s = add_public(p, log_s, shift * std::log(2.0));
  const SharedTensor r = reciprocal_raw(p, s);
  const SharedTensor prob = truncate(p, mul_broadcast_raw(p, e, r, BroadcastAxis::kRows),
                                     p.codec().frac_bits() + shift);
  return sub(p, log_s, sum_last(p, mul(p, prob, z)));
}

SharedTensor layernorm_baseline(Party& p, const SharedTensor& x, const SharedTensor& gamma,
                                const SharedTensor& beta, double eps, Interval variance) {
  PSEL_ENFORCE(x.shape.size() == 2 && x.shape[1] > 0, kShape,
               "layernorm expects [rows, dim], got " << shape_str(x.shape));
  const std::size_t dim = x.shape[1];
  const double inv_dim = 1.0 / static_cast<double>(dim);
  const SharedTensor mean = mul_public(p, sum_last(p, x), inv_dim);
  const SharedTensor centered = add_broadcast(p, x, neg(p, mean), BroadcastAxis::kRows);
  const SharedTensor var = mul_public(p, sum_last(p, square(p, centered)), inv_dim);
  const SharedTensor inv_std =
      sec_rsqrt(p, add_public(p, var, eps), Interval{variance.lo + eps, variance.hi + eps});
  const SharedTensor normed = mul_broadcast(p, centered, inv_std, BroadcastAxis::kRows);
  if (gamma.share.empty() && beta.share.empty()) return normed;
  return add_broadcast(p, mul_broadcast(p, normed, gamma, BroadcastAxis::kCols), beta,
                       BroadcastAxis::kCols);
}

}  // namespace psel
