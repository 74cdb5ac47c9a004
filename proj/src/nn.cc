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

#include "psel/nn.h"

#include <cmath>
#include <random>
#include <string>

#include "psel/error.h"
#include "psel/prng.h"

namespace psel {

void TransformerConfig::validate() const {
  PSEL_ENFORCE(layers >= 0, kConfig, "layers must be non-negative, got " << layers);
  PSEL_ENFORCE(heads >= 1 && dim >= 1, kConfig, "heads and dim must be positive");
  if (head_dim == 0) {
    PSEL_ENFORCE(dim % heads == 0, kConfig, "dim " << dim << " is not divisible by heads " << heads);
  } else {
    PSEL_ENFORCE(head_dim >= 1, kConfig, "head_dim must be positive");
  }
  PSEL_ENFORCE(seq_len >= 1, kConfig, "seq_len must be at least 1");
  PSEL_ENFORCE(classes >= 2, kConfig, "classes must be at least 2, got " << classes);
  PSEL_ENFORCE(std::isfinite(mask_value), kConfig, "mask value must be finite");
  PSEL_ENFORCE(ffn_dim >= 0 && vocab >= 0, kConfig, "ffn_dim and vocab must be non-negative");
  PSEL_ENFORCE(ln_eps > 0, kConfig, "ln_eps must be positive");
}

namespace {

void expect(const Matrix& m, long rows, long cols, std::string_view what) {
  PSEL_ENFORCE(m.rows() == rows && m.cols() == cols, kShape,
               what << " is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols);
}

void expect(const Vector& v, long n, std::string_view what) {
  PSEL_ENFORCE(v.size() == n, kShape, what << " has " << v.size() << " entries, expected " << n);
}

Matrix normal_matrix(long rows, long cols, double stddev, CounterPrng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Vector normal_vector(long n, double mean, double stddev, CounterPrng& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  Vector v(n);
  for (long i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

void TransformerWeights::validate() const {
  config.validate();
  const long d = config.dim, a = config.attn_width(), f = config.ffn_dim;
  PSEL_ENFORCE(static_cast<int>(layers.size()) == config.layers, kShape,
               "model has " << layers.size() << " layers, config says " << config.layers);
  for (const auto& l : layers) {
    expect(l.wq, d, a, "wq");
    expect(l.wk, d, a, "wk");
    expect(l.wv, d, a, "wv");
    expect(l.wo, a, d, "wo");
    expect(l.ln_gamma, d, "ln_gamma");
    expect(l.ln_beta, d, "ln_beta");
    if (f > 0) {
      expect(l.ffn_w1, d, f, "ffn_w1");
      expect(l.ffn_b1, f, "ffn_b1");
      expect(l.ffn_w2, f, d, "ffn_w2");
      expect(l.ffn_b2, d, "ffn_b2");
      expect(l.ln2_gamma, d, "ln2_gamma");
      expect(l.ln2_beta, d, "ln2_beta");
    }
  }
  expect(classifier, d, config.classes, "classifier");
  expect(classifier_bias, config.classes, "classifier_bias");
  if (config.vocab > 0) expect(embedding, config.vocab, d, "embedding");
}

TransformerWeights random_weights(const TransformerConfig& config, std::uint64_t seed) {
  config.validate();
  CounterPrng rng(seed, 0);
  TransformerWeights w;
  w.config = config;
  const long d = config.dim, a = config.attn_width(), f = config.ffn_dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < config.layers; ++i) {
    LayerWeights l;
    l.wq = normal_matrix(d, a, s, rng);
    l.wk = normal_matrix(d, a, s, rng);
    l.wv = normal_matrix(d, a, s, rng);
    l.wo = normal_matrix(a, d, 1.0 / std::sqrt(static_cast<double>(a)), rng);
    l.ln_gamma = normal_vector(d, 1.0, 0.1, rng);
    l.ln_beta = normal_vector(d, 0.0, 0.1, rng);
    if (f > 0) {
      l.ffn_w1 = normal_matrix(d, f, s, rng);
      l.ffn_b1 = normal_vector(f, 0.0, 0.1, rng);
      l.ffn_w2 = normal_matrix(f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng);
      l.ffn_b2 = normal_vector(d, 0.0, 0.1, rng);
      l.ln2_gamma = normal_vector(d, 1.0, 0.1, rng);
      l.ln2_beta = normal_vector(d, 0.0, 0.1, rng);
    }
    w.layers.push_back(std::move(l));
  }
  w.classifier = normal_matrix(d, config.classes, 2.0 * s, rng);
  w.classifier_bias = normal_vector(config.classes, 0.0, 0.1, rng);
  if (config.vocab > 0) w.embedding = normal_matrix(config.vocab, d, 1.0, rng);
  return w;
}

// ---------------------------------------------------------------------------

Vector Dataset::mask(std::size_t i, double mask_value) const {
  Vector m = Vector::Zero(seq_len);
  for (int t = lengths.at(i); t < seq_len; ++t) m[t] = mask_value;
  return m;
}

Matrix Dataset::input(std::size_t i, const TransformerWeights& w) const {
  if (!tokens) return embedded.at(i);
  PSEL_ENFORCE(w.embedding.rows() > 0, kShape, "token inputs need an embedding table");
  Matrix x(seq_len, w.embedding.cols());
  const auto& ids = token_ids.at(i);
  for (int t = 0; t < seq_len; ++t) {
    PSEL_ENFORCE(ids[t] >= 0 && ids[t] < w.embedding.rows(), kShape,
                 "token id " << ids[t] << " outside vocabulary of " << w.embedding.rows());
    x.row(t) = w.embedding.row(ids[t]);
  }
  return x;
}

Dataset Dataset::subset(const std::vector<std::size_t>& index) const {
  Dataset out;
  out.seq_len = seq_len;
  out.dim = dim;
  out.tokens = tokens;
  for (std::size_t i : index) {
    PSEL_ENFORCE(i < size(), kShape, "example " << i << " out of " << size());
    if (tokens) {
      out.token_ids.push_back(token_ids[i]);
    } else {
      out.embedded.push_back(embedded[i]);
    }
    out.lengths.push_back(lengths[i]);
  }
  return out;
}

void Dataset::validate() const {
  PSEL_ENFORCE(seq_len >= 1 && dim >= 1, kShape, "dataset needs positive seq_len and dim");
  PSEL_ENFORCE((tokens ? token_ids.size() : embedded.size()) == lengths.size(), kShape,
               "dataset rows and lengths disagree");
  for (std::size_t i = 0; i < size(); ++i) {
    PSEL_ENFORCE(lengths[i] >= 1 && lengths[i] <= seq_len, kShape,
                 "example " << i << " has valid length " << lengths[i]);
    if (tokens) {
      PSEL_ENFORCE(static_cast<int>(token_ids[i].size()) == seq_len, kShape, "example " << i << " length");
    } else {
      expect(embedded[i], seq_len, dim, "example");
    }
  }
}

Dataset random_dataset(const TransformerConfig& config, std::size_t count, std::uint64_t seed) {
  config.validate();
  CounterPrng rng(seed, 0);
  Dataset d;
  d.seq_len = config.seq_len;
  d.dim = config.dim;
  d.tokens = config.vocab > 0;
  const int lo = std::max(1, config.seq_len / 4);
  std::uniform_int_distribution<int> len(lo, config.seq_len);
  for (std::size_t i = 0; i < count; ++i) {
    if (d.tokens) {
      std::uniform_int_distribution<int> tok(0, config.vocab - 1);
      std::vector<int> ids(config.seq_len);
      for (auto& t : ids) t = tok(rng);
      d.token_ids.push_back(std::move(ids));
    } else {
      d.embedded.push_back(normal_matrix(config.seq_len, config.dim, 1.0, rng));
    }
    d.lengths.push_back(len(rng));
  }
  return d;
}

// ---------------------------------------------------------------------------

std::string_view site_name(SiteKind site) {
  switch (site) {
    case SiteKind::kAttnSoftmax:
      return "attn_softmax";
    case SiteKind::kLnRecip:
      return "ln_recip";
    case SiteKind::kSoftmaxEntropy:
      return "softmax_entropy";
  }
  return "unknown";
}

SiteKind parse_site(std::string_view name) {
  for (SiteKind s : {SiteKind::kAttnSoftmax, SiteKind::kLnRecip, SiteKind::kSoftmaxEntropy}) {
    if (site_name(s) == name) return s;
  }
  throw_error(ErrorCategory::kConfig, "unknown site kind '" + std::string(name) + "'");
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const auto e = (x.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

double entropy_of_logits(const Vector& logits) {
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd z = logits.array() - m;
  const double s = z.exp().sum();
  const Eigen::ArrayXd p = z.exp() / s;
  // -sum p ln p with ln p = z - ln s.
  return std::log(s) - (p * z).sum();
}

Matrix layernorm(const Matrix& x, const Vector& gamma, const Vector& beta, double eps) {
  Matrix out(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const Eigen::RowVectorXd c = x.row(i).array() - mu;
    const double var = c.squaredNorm() / static_cast<double>(x.cols());
    out.row(i) = (c / std::sqrt(var + eps)).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

namespace {

TapStream& stream(TapSet& taps, int layer, SiteKind site) {
  TapStream& s = taps[{layer, site}];
  s.layer = layer;
  s.site = site;
  return s;
}

std::vector<double> row_vec(const Eigen::Ref<const Eigen::RowVectorXd>& r) {
  return std::vector<double>(r.data(), r.data() + r.size());
}

Matrix layernorm_tapped(const Matrix& x, const Vector& gamma, const Vector& beta, double eps,
                        TapStream* tap) {
  if (tap) {
    for (long i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(x.cols());
      tap->inputs.push_back({var});
      tap->outputs.push_back({1.0 / std::sqrt(var + eps)});
    }
  }
  return layernorm(x, gamma, beta, eps);
}

}  // namespace

ForwardResult forward(const TransformerWeights& w, const Matrix& x, const Vector& mask, TapSet* taps) {
  const TransformerConfig& c = w.config;
  expect(x, c.seq_len, c.dim, "input");
  expect(mask, c.seq_len, "mask");
  const int dh = c.dh();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  int valid = c.seq_len;
  while (valid > 1 && mask[valid - 1] != 0.0) --valid;

  Matrix h = x;
  for (int li = 0; li < c.layers; ++li) {
    const LayerWeights& l = w.layers[li];
    const Matrix q = h * l.wq, k = h * l.wk, v = h * l.wv;
    Matrix ctx(c.seq_len, c.attn_width());
    TapStream* sm_tap = taps ? &stream(*taps, li, SiteKind::kAttnSoftmax) : nullptr;
    for (int a = 0; a < c.heads; ++a) {
      const Matrix raw = q.middleCols(a * dh, dh) * k.middleCols(a * dh, dh).transpose() * scale;
      const Matrix scores = raw.rowwise() + mask.transpose();
      const Matrix prob = softmax_rows(scores);
      if (sm_tap) {
        for (long r = 0; r < raw.rows(); ++r) {
          sm_tap->inputs.push_back(row_vec(raw.row(r)));
          sm_tap->outputs.push_back(row_vec(prob.row(r)));
          sm_tap->lengths.push_back(valid);
        }
      }
      ctx.middleCols(a * dh, dh) = prob * v.middleCols(a * dh, dh);
    }
    TapStream* ln_tap = taps ? &stream(*taps, li, SiteKind::kLnRecip) : nullptr;
    h = layernorm_tapped(h + ctx * l.wo, l.ln_gamma, l.ln_beta, c.ln_eps, ln_tap);
    if (c.ffn_dim > 0) {
      Matrix u = (h * l.ffn_w1).rowwise() + l.ffn_b1.transpose();
      u = u.unaryExpr([](double t) { return gelu(t); });
      const Matrix ff = (u * l.ffn_w2).rowwise() + l.ffn_b2.transpose();
      h = layernorm(h + ff, l.ln2_gamma, l.ln2_beta, c.ln_eps);
    }
  }
  ForwardResult out;
  out.logits = (h.row(0) * w.classifier).transpose() + w.classifier_bias;
  out.entropy = entropy_of_logits(out.logits);
  if (taps) {
    TapStream& e = stream(*taps, -1, SiteKind::kSoftmaxEntropy);
    e.inputs.push_back(std::vector<double>(out.logits.data(), out.logits.data() + out.logits.size()));
    e.outputs.push_back({out.entropy});
  }
  return out;
}

TapSet record_taps(const TransformerWeights& w, const Dataset& data) {
  PSEL_ENFORCE(data.size() > 0, kShape, "cannot record taps from an empty dataset");
  TapSet taps;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(w, data.input(i, w), data.mask(i, w.config.mask_value), &taps);
  }
  return taps;
}

}  // namespace psel
