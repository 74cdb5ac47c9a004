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

#include <span>
#include <string_view>
#include <vector>

#include "psel/approx.h"
#include "psel/nn.h"
#include "psel/party.h"
#include "psel/shares.h"

namespace psel {

// <l, w, d>: layers, attention heads, MLP hidden dimension.
struct ProxySpec {
  int layers = 1;
  int heads = 1;
  int hidden = 2;

  void validate(const TransformerConfig& target) const;
  bool operator==(const ProxySpec&) const = default;
};

// How nonlinear modules run under MPC: iterative kernels ("P") or trained
// MLPs ("PM").
enum class ProxyVariant { kBaseline, kMlp };

std::string_view variant_name(ProxyVariant v);

// Bottom `layers` layers of the target with weights copied and the
// classifier head kept.
TransformerWeights extract_submodel(const TransformerWeights& target, int layers);

// Per-head importance: Frobenius norm of Wv_h * Wo_h.
std::vector<double> head_scores(const LayerWeights& layer, const TransformerConfig& config);
// Keeps the `heads` highest-scoring heads of every layer (ties favor the
// lower index) and slices the projections; head width is unchanged.
TransformerWeights prune_heads(const TransformerWeights& model, int heads);

// Proxy skeleton for a spec: first spec.layers layers of `base`, pruned to
// spec.heads, feed-forward blocks removed.
TransformerWeights proxy_base(const TransformerWeights& base, const ProxySpec& spec);

struct ProxyModel {
  ProxySpec spec;
  TransformerWeights weights;
  std::vector<MlpApprox> softmax_mlps;  // one per layer, width seq_len
  std::vector<MlpApprox> ln_mlps;       // one per layer, scalar
  MlpApprox entropy_mlp;                // logits -> entropy

  // 2l + 1 once fully substituted.
  int mlp_count() const;
  void validate() const;
};

// Records taps from the exact proxy skeleton on `bootstrap` and fits its
// 2l + 1 MLPs.
ProxyModel build_proxy(const TransformerWeights& base, const ProxySpec& spec, const Dataset& bootstrap,
                       const TrainConfig& train);

// Plaintext forward of the substituted proxy, mirroring the MPC dataflow
// with MLPs in place of softmax, LayerNorm reciprocal and entropy.
double proxy_entropy_plain(const ProxyModel& proxy, const Matrix& x, const Vector& mask);

// ---------------------------------------------------------------------------
// MPC.

// Public architecture of a shared proxy.
struct ProxyArch {
  TransformerConfig config;  // heads = spec.heads, head_dim of the target
  ProxySpec spec;
  ProxyVariant variant = ProxyVariant::kMlp;
};

ProxyArch proxy_arch(const ProxyModel& proxy, ProxyVariant variant);

struct SharedLayer {
  SharedTensor wqkv;  // [dim, 3*heads*dh], query columns pre-scaled by 1/sqrt(dh)
  SharedTensor wo;    // [heads*dh, dim]
  SharedTensor gamma, beta;  // empty in the last layer, folded into the classifier
  SharedMlp softmax_mlp;
  SharedMlp ln_mlp;
};

struct SharedProxy {
  ProxyArch arch;
  std::vector<SharedLayer> layers;
  SharedTensor classifier, classifier_bias;
  SharedMlp entropy_mlp;
  SharedTensor embedding;  // [vocab, dim] when the config has a vocabulary
};

// Model owner passes the proxy; the peer passes nullptr. MLPs are shared
// only for the MLP variant, so a baseline proxy may omit them.
SharedProxy share_proxy(Party& p, int owner, const ProxyArch& arch, const ProxyModel* proxy);

// Secret-shared inputs for a batch: x is [batch*seq_len, dim], mask is
// [batch, seq_len] holding 0 or the mask value.
struct SharedBatch {
  std::size_t batch = 0;
  SharedTensor x;
  SharedTensor mask;
};

// Data owner shares pre-embedded rows (or one-hot tokens multiplied by the
// shared embedding table) and masks for `data`; the peer passes nullptr
// and the public row count.
SharedBatch share_batch(Party& p, int owner, const SharedProxy& proxy, const Dataset* data,
                        std::size_t count);

// The examples at `rows` (positions within the batch), in that order.
SharedBatch slice_batch(const SharedBatch& b, std::size_t seq_len, std::span<const std::size_t> rows);

// Per-example secret-shared entropies [batch]. Ledger tags: qkv,
// attn_matmul, softmax or attn_softmax_mlp, attn_out, layernorm or ln_mlp,
// classifier, entropy or entropy_mlp.
SharedTensor forward_entropy_mpc(Party& p, const SharedProxy& proxy, const SharedBatch& batch);

}  // namespace psel
