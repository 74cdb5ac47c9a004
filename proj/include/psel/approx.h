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

#include <cstdint>
#include <span>
#include <vector>

#include "psel/nn.h"
#include "psel/party.h"
#include "psel/prng.h"
#include "psel/shares.h"

// MLP emulators for nonlinear modules: y = relu(x W1 + b1) W2 + b2, trained
// ex vivo on synthetic inputs drawn from a Gaussian fitted to recorded taps.

namespace psel {

struct GaussianEstimate {
  double mean = 0.0;
  double stddev = 0.0;

  bool operator==(const GaussianEstimate&) const = default;
};

// Sample mean and population standard deviation. Needs at least two samples.
GaussianEstimate estimate_gaussian(std::span<const double> samples);
// Pools a site's tap inputs: valid score positions for attention softmax,
// variances for LayerNorm, logit entries for entropy.
GaussianEstimate estimate_site(const TapStream& taps);

struct LabeledSet {
  Matrix inputs;
  Matrix targets;
};

// n rows of `width` iid N(mean, stddev) draws. LayerNorm variance draws are
// redrawn until positive.
Matrix synthesize(SiteKind site, const GaussianEstimate& est, std::size_t n, int width, CounterPrng& rng);
// Exact targets for synthesized inputs. Attention rows get `mask_value` added
// on a padded suffix whose valid length is uniform on [1, width]; the masked
// row is both the MLP input and the softmax argument.
LabeledSet make_targets(SiteKind site, Matrix inputs, double mask_value, double ln_eps, CounterPrng& rng);

struct TrainConfig {
  std::size_t samples = std::size_t{1} << 17;
  double learning_rate = 0.02;
  int epochs = 30;
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double heldout_fraction = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct MlpApprox {
  SiteKind site = SiteKind::kAttnSoftmax;
  int layer = 0;
  Matrix w1;  // [in, hidden]
  Vector b1;
  Matrix w2;  // [hidden, out]
  Vector b2;
  double train_mse = 0.0;
  double heldout_mse = 0.0;

  int in() const { return static_cast<int>(w1.rows()); }
  int hidden() const { return static_cast<int>(w1.cols()); }
  int out() const { return static_cast<int>(w2.cols()); }
  std::size_t parameter_count() const;
  Matrix forward(const Matrix& x) const;
  void validate() const;
};

// Minibatch SGD with momentum on standardized inputs and targets; the
// standardization is folded back into the returned weights. Deterministic
// given the config. Throws kTraining on a non-finite loss.
MlpApprox train_mlp(SiteKind site, int layer, const LabeledSet& data, int hidden, const TrainConfig& cfg);

// Estimate, synthesize, label and train for one tapped site.
MlpApprox fit_site(const TapStream& taps, int width, int hidden, double mask_value, double ln_eps,
                   const TrainConfig& cfg);

double mean_squared_error(const Matrix& a, const Matrix& b);
// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// MPC evaluation.

struct MlpShape {
  int in = 0;
  int hidden = 0;
  int out = 0;
};

struct SharedMlp {
  SiteKind site = SiteKind::kAttnSoftmax;
  int layer = 0;
  SharedTensor w1, b1, w2, b2;
};

// The owner passes its trained MLP; the peer passes nullptr. The
// architecture is public.
SharedMlp share_mlp(Party& p, int owner, SiteKind site, int layer, const MlpShape& shape,
                    const MlpApprox* mlp);
// x[rows, in] -> [rows, out]: matmul, relu, matmul with shared weights.
SharedTensor mlp_forward_mpc(Party& p, const SharedMlp& mlp, const SharedTensor& x);

}  // namespace psel
