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

#include "psel/protocols.h"

#include <cmath>

#include "psel/error.h"

namespace psel {

namespace {

SharedTensor like(const Party& p, const Shape& shape) {
  SharedTensor t;
  t.party = p.id();
  t.shape = shape;
  t.share.assign(numel(shape), 0);
  return t;
}

void check_view(const Party& p, const SharedTensor& x) {
  PSEL_ENFORCE(x.party == p.id(), kShape, "party " << p.id() << " given party " << x.party << "'s view");
  PSEL_ENFORCE(x.share.size() == numel(x.shape), kShape,
               "tensor holds " << x.share.size() << " words for shape " << shape_str(x.shape));
}

void check_same(const Party& p, const SharedTensor& x, const SharedTensor& y, std::string_view op) {
  check_view(p, x);
  check_view(p, y);
  PSEL_ENFORCE(x.shape == y.shape, kShape,
               op << ": shape mismatch " << shape_str(x.shape) << " vs " << shape_str(y.shape));
}

std::size_t last_dim(const SharedTensor& x) {
  PSEL_ENFORCE(!x.shape.empty(), kShape, "tensor has no dimensions");
  return x.shape.back();
}

std::vector<RingElement> open_words(Party& p, std::span<const RingElement> mine, std::string_view op) {
  std::vector<RingElement> theirs = p.exchange(mine, op);
  PSEL_ENFORCE(theirs.size() == mine.size(), kProtocol,
               op << ": peer opened " << theirs.size() << " words, expected " << mine.size());
  const Ring& r = p.ring();
  for (std::size_t i = 0; i < mine.size(); ++i) theirs[i] = r.add(theirs[i], mine[i]);
  return theirs;
}

// Opens XOR-shared words.
std::vector<RingElement> open_xor(Party& p, std::span<const RingElement> mine, std::string_view op) {
  std::vector<RingElement> theirs = p.exchange(mine, op);
  PSEL_ENFORCE(theirs.size() == mine.size(), kProtocol,
               op << ": peer opened " << theirs.size() << " words, expected " << mine.size());
  for (std::size_t i = 0; i < mine.size(); ++i) theirs[i] ^= mine[i];
  return theirs;
}

// Bitwise AND of XOR-shared words e & f: one round, two words per element.
std::vector<RingElement> and_xor(Party& p, std::span<const RingElement> e, std::span<const RingElement> f) {
  const std::size_t n = e.size();
  auto t = p.dealer().deal_and(n)[p.id()];
  const RingElement mask = p.ring().mask();
  std::vector<RingElement> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = e[i] ^ t.u[i];
    masked[n + i] = f[i] ^ t.v[i];
  }
  const auto opened = open_xor(p, masked, "and");
  std::vector<RingElement> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RingElement d = opened[i], g = opened[n + i];
    RingElement v = t.w[i] ^ (d & t.v[i]) ^ (g & t.u[i]);
    if (p.id() == 0) v ^= d & g;
    z[i] = v & mask;
  }
  p.add_flops(4 * n);
  return z;
}

int prefix_levels(int bits) {
  int levels = 0;
  for (int s = 1; s < bits - 1; s <<= 1) ++levels;
  return levels;
}

}  // namespace

// ---------------------------------------------------------------------------

SharedTensor input_words(Party& p, int owner, const Shape& shape, std::span<const RingElement> words) {
  PSEL_ENFORCE(owner == 0 || owner == 1, kConfig, "input owner must be 0 or 1");
  const std::size_t n = numel(shape);
  SharedTensor t = like(p, shape);
  if (p.id() == owner) {
    PSEL_ENFORCE(words.size() == n, kShape,
                 "input of " << words.size() << " values for shape " << shape_str(shape));
    const Ring& r = p.ring();
    std::vector<RingElement> peer(n);
    for (std::size_t i = 0; i < n; ++i) {
      peer[i] = r.reduce(p.private_rng()());
      t.share[i] = r.sub(words[i], peer[i]);
    }
    p.exchange(peer, "input");
  } else {
    const auto got = p.exchange({}, "input");
    PSEL_ENFORCE(got.size() == n, kShape,
                 "owner shared " << got.size() << " values, expected shape " << shape_str(shape));
    t.share = got;
  }
  return t;
}

SharedTensor input(Party& p, int owner, const Shape& shape, std::span<const double> values) {
  if (p.id() == owner) return input_words(p, owner, shape, p.codec().encode(values));
  return input_words(p, owner, shape, {});
}

SharedTensor public_tensor(Party& p, const Shape& shape, std::span<const double> values) {
  PSEL_ENFORCE(values.size() == numel(shape), kShape,
               values.size() << " public values for shape " << shape_str(shape));
  SharedTensor t = like(p, shape);
  if (p.id() == 0) t.share = p.codec().encode(values);
  return t;
}

SharedTensor constant(Party& p, const Shape& shape, double value) {
  SharedTensor t = like(p, shape);
  if (p.id() == 0) {
    const RingElement v = p.codec().encode(value);
    for (auto& w : t.share) w = v;
  }
  return t;
}

SharedTensor zeros(Party& p, const Shape& shape) { return like(p, shape); }

std::vector<double> reveal(Party& p, const SharedTensor& x, RevealKind kind, std::string_view what) {
  check_view(p, x);
  const auto words = open_words(p, x.share, "reveal");
  std::vector<double> values = p.codec().decode(words);
  p.reveals().append(kind, std::string(what), values);
  return values;
}

// ---------------------------------------------------------------------------

SharedTensor add(Party& p, const SharedTensor& x, const SharedTensor& y) {
  check_same(p, x, y, "add");
  SharedTensor z = x;
  for (std::size_t i = 0; i < z.size(); ++i) z.share[i] = p.ring().add(x.share[i], y.share[i]);
  p.add_flops(z.size());
  return z;
}

SharedTensor sub(Party& p, const SharedTensor& x, const SharedTensor& y) {
  check_same(p, x, y, "sub");
  SharedTensor z = x;
  for (std::size_t i = 0; i < z.size(); ++i) z.share[i] = p.ring().sub(x.share[i], y.share[i]);
  p.add_flops(z.size());
  return z;
}

SharedTensor neg(Party& p, const SharedTensor& x) {
  check_view(p, x);
  SharedTensor z = x;
  for (auto& w : z.share) w = p.ring().neg(w);
  return z;
}

SharedTensor add_public(Party& p, const SharedTensor& x, double c) {
  check_view(p, x);
  SharedTensor z = x;
  if (p.id() == 0) {
    const RingElement v = p.codec().encode(c);
    for (auto& w : z.share) w = p.ring().add(w, v);
  }
  return z;
}

SharedTensor mul_int(Party& p, const SharedTensor& x, std::int64_t c) {
  check_view(p, x);
  SharedTensor z = x;
  const RingElement v = p.ring().from_signed(c);
  for (auto& w : z.share) w = p.ring().mul(w, v);
  p.add_flops(z.size());
  return z;
}

SharedTensor mul_public(Party& p, const SharedTensor& x, double c) {
  PSEL_ENFORCE(std::isfinite(c), kEncode, "public scalar " << c << " is not finite");
  if (c == std::nearbyint(c) && std::fabs(c) < 0x1p62) {
    return mul_int(p, x, static_cast<std::int64_t>(c));
  }
  const std::int64_t w = std::llround(c * p.codec().scale());
  return truncate(p, mul_int(p, x, w), p.codec().frac_bits());
}

SharedTensor add_broadcast(Party& p, const SharedTensor& x, const SharedTensor& v, BroadcastAxis axis) {
  check_view(p, x);
  check_view(p, v);
  const std::size_t cols = last_dim(x);
  const std::size_t rows = cols ? x.size() / cols : 0;
  const std::size_t want = axis == BroadcastAxis::kRows ? rows : cols;
  PSEL_ENFORCE(v.size() == want, kShape,
               "broadcast operand has " << v.size() << " entries, expected " << want);
  SharedTensor z = x;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const RingElement b = axis == BroadcastAxis::kRows ? v.share[i] : v.share[j];
      z.share[i * cols + j] = p.ring().add(z.share[i * cols + j], b);
    }
  }
  p.add_flops(z.size());
  return z;
}

SharedTensor sum_last(Party& p, const SharedTensor& x) {
  check_view(p, x);
  const std::size_t cols = last_dim(x);
  Shape shape(x.shape.begin(), x.shape.end() - 1);
  if (shape.empty()) shape = {1};
  SharedTensor z = like(p, shape);
  for (std::size_t i = 0; i < z.size(); ++i) {
    RingElement acc = 0;
    for (std::size_t j = 0; j < cols; ++j) acc += x.share[i * cols + j];
    z.share[i] = p.ring().reduce(acc);
  }
  p.add_flops(x.size());
  return z;
}

// ---------------------------------------------------------------------------

SharedTensor reshape(const SharedTensor& x, const Shape& shape) {
  PSEL_ENFORCE(numel(shape) == x.size(), kShape,
               "cannot reshape " << shape_str(x.shape) << " to " << shape_str(shape));
  SharedTensor z = x;
  z.shape = shape;
  return z;
}

SharedTensor transpose_last(const SharedTensor& x) {
  PSEL_ENFORCE(x.shape.size() >= 2, kShape, "transpose needs two dimensions, got " << shape_str(x.shape));
  const std::size_t r = x.shape[x.shape.size() - 2], c = x.shape.back();
  const std::size_t slots = (r * c) != 0 ? x.size() / (r * c) : 0;
  SharedTensor z = x;
  std::swap(z.shape[z.shape.size() - 2], z.shape.back());
  for (std::size_t s = 0; s < slots; ++s) {
    const RingElement* src = x.share.data() + s * r * c;
    RingElement* dst = z.share.data() + s * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  return z;
}

SharedTensor slice_cols(const SharedTensor& x, std::size_t begin, std::size_t end) {
  const std::size_t cols = last_dim(x);
  PSEL_ENFORCE(begin <= end && end <= cols, kShape,
               "column slice [" << begin << ", " << end << ") of " << cols);
  const std::size_t rows = cols ? x.size() / cols : 0;
  SharedTensor z;
  z.party = x.party;
  z.shape = x.shape;
  z.shape.back() = end - begin;
  z.share.resize(rows * (end - begin));
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(x.share.begin() + i * cols + begin, x.share.begin() + i * cols + end,
              z.share.begin() + i * (end - begin));
  }
  return z;
}

SharedTensor gather_rows(const SharedTensor& x, std::span<const std::size_t> index) {
  const std::size_t cols = last_dim(x);
  const std::size_t rows = cols ? x.size() / cols : 0;
  SharedTensor z;
  z.party = x.party;
  z.shape = {index.size(), cols};
  z.share.resize(index.size() * cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    PSEL_ENFORCE(index[i] < rows, kShape, "row " << index[i] << " out of " << rows);
    std::copy(x.share.begin() + index[i] * cols, x.share.begin() + (index[i] + 1) * cols,
              z.share.begin() + i * cols);
  }
  return z;
}

SharedTensor concat_cols(std::span<const SharedTensor> parts) {
  PSEL_ENFORCE(!parts.empty(), kShape, "nothing to concatenate");
  const Shape lead(parts[0].shape.begin(), parts[0].shape.end() - 1);
  const std::size_t rows = numel(lead);
  std::size_t total = 0;
  for (const auto& t : parts) {
    PSEL_ENFORCE(Shape(t.shape.begin(), t.shape.end() - 1) == lead && t.party == parts[0].party,
                 kShape, "concat: incompatible part " << shape_str(t.shape));
    total += t.shape.back();
  }
  SharedTensor z;
  z.party = parts[0].party;
  z.shape = lead;
  z.shape.push_back(total);
  z.share.resize(rows * total);
  std::size_t off = 0;
  for (const auto& t : parts) {
    const std::size_t c = t.shape.back();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(t.share.begin() + i * c, t.share.begin() + (i + 1) * c,
                z.share.begin() + i * total + off);
    }
    off += c;
  }
  return z;
}

SharedTensor concat_rows(std::span<const SharedTensor> parts) {
  PSEL_ENFORCE(!parts.empty(), kShape, "nothing to concatenate");
  const Shape tail(parts[0].shape.begin() + 1, parts[0].shape.end());
  SharedTensor z;
  z.party = parts[0].party;
  z.shape = parts[0].shape;
  z.shape[0] = 0;
  for (const auto& t : parts) {
    PSEL_ENFORCE(Shape(t.shape.begin() + 1, t.shape.end()) == tail && t.party == z.party, kShape,
                 "concat: incompatible part " << shape_str(t.shape));
    z.shape[0] += t.shape[0];
    z.share.insert(z.share.end(), t.share.begin(), t.share.end());
  }
  return z;
}

// ---------------------------------------------------------------------------

SharedTensor truncate(Party& p, const SharedTensor& x, int shift) {
  check_view(p, x);
  if (shift == 0) return x;
  const Ring& r = p.ring();
  const int k = r.bits();
  const std::size_t n = x.size();
  auto pair = p.dealer().deal_truncation(n, shift)[p.id()];
  const RingElement offset = RingElement{1} << (k - 2);
  std::vector<RingElement> masked(n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = r.add(x.share[i], pair.r[i]);
    if (p.id() == 0) masked[i] = r.add(masked[i], offset);
  }
  const auto c = open_words(p, masked, "trunc");
  SharedTensor z = x;
  const RingElement offset_hi = RingElement{1} << (k - 2 - shift);
  for (std::size_t i = 0; i < n; ++i) {
    RingElement v = r.neg(pair.hi[i]);
    if (p.id() == 0) v = r.add(v, r.sub(c[i] >> shift, offset_hi));
    z.share[i] = v;
  }
  p.add_flops(2 * n);
  return z;
}

SharedTensor mul_raw_with(Party& p, const SharedTensor& x, const SharedTensor& y, BeaverTriple& t) {
  check_same(p, x, y, "mul");
  PSEL_ENFORCE(!t.consumed, kProtocol, "Beaver triple reused");
  const std::size_t n = x.size();
  PSEL_ENFORCE(t.a.size() == n && t.b.size() == n && t.c.size() == n, kResource,
               "triple batch holds " << t.a.size() << " triples, " << n << " needed");
  t.consumed = true;
  const Ring& r = p.ring();
  std::vector<RingElement> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = r.sub(x.share[i], t.a[i]);
    masked[n + i] = r.sub(y.share[i], t.b[i]);
  }
  const auto opened = open_words(p, masked, "beaver");
  SharedTensor z = x;
  for (std::size_t i = 0; i < n; ++i) {
    const RingElement eps = opened[i], del = opened[n + i];
    RingElement v = t.c[i] + eps * t.b[i] + del * t.a[i];
    if (p.id() == 0) v += eps * del;
    z.share[i] = r.reduce(v);
  }
  p.add_flops(6 * n);
  return z;
}

SharedTensor mul_raw(Party& p, const SharedTensor& x, const SharedTensor& y) {
  auto t = p.dealer().deal_triples(x.size())[p.id()];
  return mul_raw_with(p, x, y, t);
}

SharedTensor mul(Party& p, const SharedTensor& x, const SharedTensor& y) {
  return truncate(p, mul_raw(p, x, y), p.codec().frac_bits());
}

SharedTensor square(Party& p, const SharedTensor& x) {
  check_view(p, x);
  const std::size_t n = x.size();
  auto sq = p.dealer().deal_squares(n)[p.id()];
  const Ring& r = p.ring();
  std::vector<RingElement> masked(n);
  for (std::size_t i = 0; i < n; ++i) masked[i] = r.sub(x.share[i], sq.a[i]);
  const auto eps = open_words(p, masked, "square");
  SharedTensor z = x;
  for (std::size_t i = 0; i < n; ++i) {
    RingElement v = sq.c[i] + 2 * eps[i] * sq.a[i];
    if (p.id() == 0) v += eps[i] * eps[i];
    z.share[i] = r.reduce(v);
  }
  p.add_flops(4 * n);
  return truncate(p, z, p.codec().frac_bits());
}

SharedTensor mul_broadcast_raw(Party& p, const SharedTensor& x, const SharedTensor& v,
                               BroadcastAxis axis) {
  check_view(p, x);
  check_view(p, v);
  const std::size_t cols = last_dim(x);
  const std::size_t rows = cols ? x.size() / cols : 0;
  const std::size_t nb = axis == BroadcastAxis::kRows ? rows : cols;
  PSEL_ENFORCE(v.size() == nb, kShape, "broadcast operand has " << v.size() << " entries, expected " << nb);
  auto t = p.dealer().deal_broadcast(rows, cols, axis)[p.id()];
  const Ring& r = p.ring();
  std::vector<RingElement> masked(rows * cols + nb);
  for (std::size_t i = 0; i < rows * cols; ++i) masked[i] = r.sub(x.share[i], t.a[i]);
  for (std::size_t i = 0; i < nb; ++i) masked[rows * cols + i] = r.sub(v.share[i], t.b[i]);
  const auto opened = open_words(p, masked, "bcast");
  SharedTensor z = x;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t e = i * cols + j;
      const std::size_t bi = axis == BroadcastAxis::kRows ? i : j;
      const RingElement eps = opened[e], del = opened[rows * cols + bi];
      RingElement w = t.c[e] + eps * t.b[bi] + del * t.a[e];
      if (p.id() == 0) w += eps * del;
      z.share[e] = r.reduce(w);
    }
  }
  p.add_flops(6 * rows * cols);
  return z;
}

SharedTensor mul_broadcast(Party& p, const SharedTensor& x, const SharedTensor& v, BroadcastAxis axis) {
  return truncate(p, mul_broadcast_raw(p, x, v, axis), p.codec().frac_bits());
}

SharedTensor matmul_raw(Party& p, const SharedTensor& x, const SharedTensor& y) {
  check_view(p, x);
  check_view(p, y);
  PSEL_ENFORCE((x.shape.size() == 2 && y.shape.size() == 2) || (x.shape.size() == 3 && y.shape.size() == 3),
               kShape, "matmul needs two 2-D or two 3-D operands, got " << shape_str(x.shape) << " and "
                                                                       << shape_str(y.shape));
  const bool batched = x.shape.size() == 3;
  const std::size_t b = batched ? x.shape[0] : 1;
  const std::size_t m = x.shape[batched ? 1 : 0], k = x.shape.back();
  const std::size_t k2 = y.shape[batched ? 1 : 0], n = y.shape.back();
  PSEL_ENFORCE(k == k2 && (!batched || y.shape[0] == b), kShape,
               "matmul dimension mismatch " << shape_str(x.shape) << " x " << shape_str(y.shape));
  auto t = p.dealer().deal_matmul(b, m, k, n)[p.id()];
  const Ring& r = p.ring();
  const std::size_t nx = b * m * k, ny = b * k * n;
  std::vector<RingElement> masked(nx + ny);
  for (std::size_t i = 0; i < nx; ++i) masked[i] = r.sub(x.share[i], t.a[i]);
  for (std::size_t i = 0; i < ny; ++i) masked[nx + i] = r.sub(y.share[i], t.b[i]);
  const auto opened = open_words(p, masked, "matmul");
  const std::span<const RingElement> e(opened.data(), nx), d(opened.data() + nx, ny);

  SharedTensor z;
  z.party = p.id();
  z.shape = batched ? Shape{b, m, n} : Shape{m, n};
  z.share = t.c;
  for (std::size_t s = 0; s < b; ++s) {
    const auto es = e.subspan(s * m * k, m * k);
    const auto ds = d.subspan(s * k * n, k * n);
    const auto out = std::span(z.share).subspan(s * m * n, m * n);
    ring_matmul(r, es, std::span<const RingElement>(t.b).subspan(s * k * n, k * n), out, m, k, n, true);
    ring_matmul(r, std::span<const RingElement>(t.a).subspan(s * m * k, m * k), ds, out, m, k, n, true);
    if (p.id() == 0) ring_matmul(r, es, ds, out, m, k, n, true);
  }
  p.add_flops(6 * b * m * k * n);
  return z;
}

SharedTensor matmul(Party& p, const SharedTensor& x, const SharedTensor& y) {
  return truncate(p, matmul_raw(p, x, y), p.codec().frac_bits());
}

// ---------------------------------------------------------------------------

std::vector<RingElement> msb_xor(Party& p, const SharedTensor& x) {
  check_view(p, x);
  const int k = p.ring().bits();
  const RingElement mask = p.ring().mask();
  const std::size_t n = x.size();
  // XOR shares of the two addends: party 0 holds x0, party 1 holds x1.
  std::vector<RingElement> e(n, 0), f(n, 0);
  for (std::size_t i = 0; i < n; ++i) (p.id() == 0 ? e : f)[i] = x.share[i];
  std::vector<RingElement> prop(x.share.begin(), x.share.end());
  std::vector<RingElement> gen = and_xor(p, e, f);

  const int levels = prefix_levels(k);
  std::vector<RingElement> lhs(2 * n), rhs(2 * n);
  for (int level = 0, s = 1; level < levels; ++level, s <<= 1) {
    const bool last = level == levels - 1;
    const std::size_t m = last ? n : 2 * n;
    lhs.resize(m);
    rhs.resize(m);
    for (std::size_t i = 0; i < n; ++i) {
      lhs[i] = prop[i];
      rhs[i] = (gen[i] << s) & mask;
      if (!last) {
        lhs[n + i] = prop[i];
        rhs[n + i] = (prop[i] << s) & mask;
      }
    }
    const auto z = and_xor(p, lhs, rhs);
    for (std::size_t i = 0; i < n; ++i) {
      gen[i] ^= z[i];
      if (!last) prop[i] = z[n + i];
    }
  }
  // Sign bit = top bit of x0 ^ x1 xor the carry into it.
  std::vector<RingElement> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = ((x.share[i] >> (k - 1)) ^ (gen[i] >> (k - 2))) & 1U;
  }
  return bits;
}

SharedTensor msb(Party& p, const SharedTensor& x) {
  const auto bits = msb_xor(p, x);
  const std::size_t n = bits.size();
  auto da = p.dealer().deal_dabits(n)[p.id()];
  std::vector<RingElement> masked(n);
  for (std::size_t i = 0; i < n; ++i) masked[i] = bits[i] ^ da.bits[i];
  const auto c = open_xor(p, masked, "b2a");
  const Ring& r = p.ring();
  SharedTensor z = like(p, x.shape);
  for (std::size_t i = 0; i < n; ++i) {
    // b = c xor r = c + r - 2cr.
    const RingElement ci = c[i] & 1U;
    RingElement v = r.sub(da.arith[i], r.mul(2 * ci, da.arith[i]));
    if (p.id() == 0) v = r.add(v, ci);
    z.share[i] = v;
  }
  p.add_flops(3 * n);
  return z;
}

ProtocolCost compare_analytic_cost(int ring_bits) {
  const int levels = prefix_levels(ring_bits);
  // Generate AND (2 words), full levels (4 words), last level (2 words), open (1 word).
  const std::uint64_t words = 2 + 4 * static_cast<std::uint64_t>(levels - 1) + 2 + 1;
  return {static_cast<std::uint64_t>(levels) + 2, 2 * 8 * words};
}

std::vector<std::uint8_t> compare_open(Party& p, const SharedTensor& a, const SharedTensor& b,
                                       RevealKind kind) {
  check_same(p, a, b, "compare");
  const std::size_t n = a.size();
  if (n == 0) return {};
  const ComparisonCost& model = p.config().comparison;
  std::optional<AnalyticScope> scope;
  if (model.use_model) scope.emplace(p, "compare", model.rounds, model.bytes * n);
  const auto bits = msb_xor(p, sub(p, a, b));
  const auto opened = open_xor(p, bits, "compare_open");
  std::vector<std::uint8_t> out(n);
  std::vector<double> logged(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>(opened[i] & 1U);
    logged[i] = out[i];
  }
  p.reveals().append(kind, p.tag_or("compare"), std::move(logged));
  return out;
}

SharedTensor relu(Party& p, const SharedTensor& x) {
  const SharedTensor bit = msb(p, x);
  SharedTensor keep = neg(p, bit);
  if (p.id() == 0) {
    for (auto& w : keep.share) w = p.ring().add(w, 1);
  }
  return mul_raw(p, keep, x);
}

SharedTensor select(Party& p, const SharedTensor& bit, const SharedTensor& a, const SharedTensor& b) {
  return add(p, b, mul_raw(p, bit, sub(p, a, b)));
}

}  // namespace psel
