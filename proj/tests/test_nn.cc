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
#include "psel/nn.h"

namespace psel {
namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
  Rows r(m.rows(), std::vector<double>(m.cols()));
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

Rows mm(const Rows& a, const Rows& b) {
  Rows c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

void ln_rows(Rows& x, const Vector& g, const Vector& b, double eps) {
  for (auto& row : x) {
    double mu = 0.0, var = 0.0;
    for (double v : row) mu += v / row.size();
    for (double v : row) var += (v - mu) * (v - mu) / row.size();
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mu) / std::sqrt(var + eps) * g[j] + b[j];
  }
}

// Loop-level forward pass written independently of the Eigen version.
std::vector<double> oracle_logits(const TransformerWeights& w, const Matrix& xin, const Vector& mask) {
  const auto& c = w.config;
  const int dh = c.dh();
  Rows h = to_rows(xin);
  for (const auto& l : w.layers) {
    const Rows q = mm(h, to_rows(l.wq)), k = mm(h, to_rows(l.wk)), v = mm(h, to_rows(l.wv));
    Rows ctx(c.seq_len, std::vector<double>(c.attn_width(), 0.0));
    for (int a = 0; a < c.heads; ++a) {
      for (int i = 0; i < c.seq_len; ++i) {
        std::vector<double> s(c.seq_len);
        double mx = -1e300;
        for (int j = 0; j < c.seq_len; ++j) {
          double dot = 0.0;
          for (int t = 0; t < dh; ++t) dot += q[i][a * dh + t] * k[j][a * dh + t];
          s[j] = dot / std::sqrt(static_cast<double>(dh)) + mask[j];
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (int j = 0; j < c.seq_len; ++j)
          for (int t = 0; t < dh; ++t) ctx[i][a * dh + t] += s[j] / z * v[j][a * dh + t];
      }
    }
    const Rows proj = mm(ctx, to_rows(l.wo));
    for (int i = 0; i < c.seq_len; ++i)
      for (int j = 0; j < c.dim; ++j) h[i][j] += proj[i][j];
    ln_rows(h, l.ln_gamma, l.ln_beta, c.ln_eps);
    if (c.ffn_dim > 0) {
      Rows u = mm(h, to_rows(l.ffn_w1));
      for (auto& row : u)
        for (std::size_t j = 0; j < row.size(); ++j) {
          const double t = row[j] + l.ffn_b1[j];
          row[j] = 0.5 * t * (1.0 + std::erf(t / std::sqrt(2.0)));
        }
      const Rows f = mm(u, to_rows(l.ffn_w2));
      for (int i = 0; i < c.seq_len; ++i)
        for (int j = 0; j < c.dim; ++j) h[i][j] += f[i][j] + l.ffn_b2[j];
      ln_rows(h, l.ln2_gamma, l.ln2_beta, c.ln_eps);
    }
  }
  std::vector<double> out(c.classes);
  for (int k = 0; k < c.classes; ++k) {
    out[k] = w.classifier_bias[k];
    for (int j = 0; j < c.dim; ++j) out[k] += h[0][j] * w.classifier(j, k);
  }
  return out;
}

TransformerConfig tiny(int ffn = 0) {
  TransformerConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 8;
  c.seq_len = 6;
  c.classes = 3;
  c.ffn_dim = ffn;
  return c;
}

TEST_SUITE("nn") {
  TEST_CASE("forward matches a loop-level oracle") {
    for (int ffn : {0, 16}) {
      const auto c = tiny(ffn);
      const auto w = random_weights(c, 3);
      const auto d = random_dataset(c, 5, 4);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto r = forward(w, d.input(i, w), d.mask(i, c.mask_value));
        const auto ref = oracle_logits(w, d.input(i, w), d.mask(i, c.mask_value));
        for (int k = 0; k < c.classes; ++k) CHECK(r.logits[k] == doctest::Approx(ref[k]).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("softmax rows sum to one and entropy lies in [0, ln C]") {
    Matrix x(4, 5);
    x << 1, 2, 3, 4, 5, -1, -1, -1, -1, -1, 100, 0, 0, 0, 0, 0.5, -0.5, 2, 7, 3;
    const Matrix p = softmax_rows(x);
    for (long r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
    const auto c = tiny();
    const auto w = random_weights(c, 5);
    const auto d = random_dataset(c, 20, 6);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double h = forward(w, d.input(i, w), d.mask(i, c.mask_value)).entropy;
      CHECK(h >= 0.0);
      CHECK(h <= std::log(3.0) + 1e-12);
    }
    Vector uniform = Vector::Constant(4, 0.3);
    CHECK(entropy_of_logits(uniform) == doctest::Approx(std::log(4.0)));
  }

  TEST_CASE("finite mask reduces but does not zero attention") {
    Matrix scores(1, 4);
    scores << 0.2, 0.1, 0.4, 0.3;
    Matrix finite = scores, hard = scores;
    finite(0, 3) += -3.0;
    hard(0, 3) += -1e9;
    const Matrix pf = softmax_rows(finite), ph = softmax_rows(hard), p0 = softmax_rows(scores);
    CHECK(pf(0, 3) > 0.0);
    CHECK(pf(0, 3) < p0(0, 3));
    CHECK(ph(0, 3) < pf(0, 3));
    CHECK(ph(0, 3) == doctest::Approx(0.0));
  }

  TEST_CASE("dataset mask marks the padded suffix") {
    const auto c = tiny();
    auto d = random_dataset(c, 3, 8);
    d.lengths[0] = 4;
    const Vector m = d.mask(0, -3.0);
    for (int t = 0; t < c.seq_len; ++t) CHECK(m[t] == (t < 4 ? 0.0 : -3.0));
  }

  TEST_CASE("taps have one row per example, head and position") {
    auto c = tiny();
    c.layers = 1;
    const auto w = random_weights(c, 9);
    const auto d = random_dataset(c, 10, 10);
    const TapSet taps = record_taps(w, d);
    CHECK(taps.at({0, SiteKind::kAttnSoftmax}).inputs.size() == 10u * c.heads * c.seq_len);
    CHECK(taps.at({0, SiteKind::kLnRecip}).inputs.size() == 10u * c.seq_len);
    CHECK(taps.at({-1, SiteKind::kSoftmaxEntropy}).inputs.size() == 10u);
    const auto& ln = taps.at({0, SiteKind::kLnRecip});
    for (std::size_t i = 0; i < ln.inputs.size(); ++i) {
      CHECK(ln.outputs[i][0] == doctest::Approx(1.0 / std::sqrt(ln.inputs[i][0] + c.ln_eps)));
    }
    CHECK_THROWS_AS(record_taps(w, d.subset({})), Error);
  }

  TEST_CASE("weights and datasets are deterministic per seed") {
    const auto c = tiny(4);
    const auto a = random_weights(c, 1), b = random_weights(c, 1), other = random_weights(c, 2);
    CHECK(a.layers[1].wq == b.layers[1].wq);
    CHECK(a.classifier != other.classifier);
    const auto d1 = random_dataset(c, 4, 7), d2 = random_dataset(c, 4, 7);
    CHECK(d1.lengths == d2.lengths);
    CHECK(d1.embedded[3] == d2.embedded[3]);
  }

  TEST_CASE("token inputs use the embedding table") {
    auto c = tiny();
    c.vocab = 11;
    const auto w = random_weights(c, 12);
    const auto d = random_dataset(c, 3, 13);
    REQUIRE(d.tokens);
    const Matrix x = d.input(1, w);
    for (int t = 0; t < c.seq_len; ++t) CHECK(x.row(t) == w.embedding.row(d.token_ids[1][t]));
  }

  TEST_CASE("invalid configurations are rejected") {
    auto c = tiny();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny();
    c.classes = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    auto w = random_weights(tiny(), 1);
    w.layers[0].wo.resize(3, 3);
    CHECK_THROWS_AS(w.validate(), Error);
  }

  TEST_CASE("gelu reference values") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429));
    CHECK(gelu(-10.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

}  // namespace
}  // namespace psel
