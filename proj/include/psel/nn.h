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

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

// Plaintext reference transformer in double precision. It defines the truth
// every MPC result is checked against.

namespace psel {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct TransformerConfig {
  int layers = 2;
  int heads = 4;
  int dim = 64;
  // 0 means dim / heads. Pruned proxies keep the target's head width.
  int head_dim = 0;
  int seq_len = 128;
  int classes = 2;
  double mask_value = -3.0;
  // 0 omits the feed-forward block.
  int ffn_dim = 0;
  // Token-id inputs need an embedding table of this many rows; 0 means
  // pre-embedded inputs only.
  int vocab = 0;
  double ln_eps = 1e-5;

  int dh() const { return head_dim > 0 ? head_dim : dim / heads; }
  int attn_width() const { return heads * dh(); }
  void validate() const;
  bool operator==(const TransformerConfig&) const = default;
};

struct LayerWeights {
  // Projections act on row vectors: Q = X * wq. Head h owns columns
  // [h*dh, (h+1)*dh) of wq, wk, wv and the same rows of wo.
  Matrix wq, wk, wv;  // [dim, heads*dh]
  Matrix wo;          // [heads*dh, dim]
  Vector ln_gamma, ln_beta;
  Matrix ffn_w1;  // [dim, ffn_dim]
  Vector ffn_b1;
  Matrix ffn_w2;  // [ffn_dim, dim]
  Vector ffn_b2;
  Vector ln2_gamma, ln2_beta;
};

struct TransformerWeights {
  TransformerConfig config;
  std::vector<LayerWeights> layers;
  Matrix classifier;  // [dim, classes]
  Vector classifier_bias;
  Matrix embedding;  // [vocab, dim] or empty

  // Throws kShape when any block disagrees with the config.
  void validate() const;
};

// Seeded synthetic weights: projections N(0, 1/dim), LayerNorm affine near
// identity, classifier N(0, 4/dim).
TransformerWeights random_weights(const TransformerConfig& config, std::uint64_t seed);

// A batch of inputs. Either pre-embedded rows ([seq_len, dim] each) or token
// ids with an embedding table held by the model owner.
struct Dataset {
  int seq_len = 0;
  int dim = 0;
  bool tokens = false;
  std::vector<Matrix> embedded;
  std::vector<std::vector<int>> token_ids;
  // Valid prefix length of each example; later positions are padding.
  std::vector<int> lengths;

  std::size_t size() const { return lengths.size(); }
  // Additive attention mask row: 0 for valid positions, mask_value after.
  Vector mask(std::size_t i, double mask_value) const;
  // Inputs for example i as [seq_len, dim] rows.
  Matrix input(std::size_t i, const TransformerWeights& w) const;
  Dataset subset(const std::vector<std::size_t>& index) const;
  void validate() const;
};

// Seeded dataset: N(0, 1) embedded rows (or uniform token ids when vocab > 0)
// with valid lengths uniform on [seq_len/4, seq_len].
Dataset random_dataset(const TransformerConfig& config, std::size_t count, std::uint64_t seed);

enum class SiteKind { kAttnSoftmax, kLnRecip, kSoftmaxEntropy };

std::string_view site_name(SiteKind site);
SiteKind parse_site(std::string_view name);

// Recorded inputs/outputs of one nonlinear site. Attention-softmax inputs are
// pre-mask score rows; `lengths` holds each row's valid prefix so that the
// mask can be reapplied. LayerNorm inputs are row variances (one value per
// row) with outputs 1/sqrt(v + eps). Entropy inputs are logits.
struct TapStream {
  int layer = 0;
  SiteKind site = SiteKind::kAttnSoftmax;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;
  std::vector<int> lengths;
};

using TapKey = std::pair<int, SiteKind>;
using TapSet = std::map<TapKey, TapStream>;

struct ForwardResult {
  Vector logits;
  double entropy = 0.0;
};

// Row-wise helpers.
Matrix softmax_rows(const Matrix& x);
double entropy_of_logits(const Vector& logits);
Matrix layernorm(const Matrix& x, const Vector& gamma, const Vector& beta, double eps);
double gelu(double x);

// One example: x is [seq_len, dim]; mask is the additive key mask.
ForwardResult forward(const TransformerWeights& w, const Matrix& x, const Vector& mask,
                      TapSet* taps = nullptr);

// Forward passes over every example, collecting taps for each
// (layer, site). Entropy taps use layer = -1.
TapSet record_taps(const TransformerWeights& w, const Dataset& data);

}  // namespace psel
