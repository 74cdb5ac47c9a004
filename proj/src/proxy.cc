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

#include "psel/proxy.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psel/error.h"
#include "psel/kernels.h"
#include "psel/protocols.h"

namespace psel {

void ProxySpec::validate(const TransformerConfig& target) const {
  PSEL_ENFORCE(layers >= 1 && layers <= target.layers, kConfig,
               "proxy layers " << layers << " outside [1, " << target.layers << "]");
  PSEL_ENFORCE(heads >= 1 && heads <= target.heads, kConfig,
               "proxy heads " << heads << " outside [1, " << target.heads << "]");
  PSEL_ENFORCE(hidden >= 1, kConfig, "proxy MLP hidden dimension must be at least 1");
}

std::string_view variant_name(ProxyVariant v) { return v == ProxyVariant::kBaseline ? "P" : "PM"; }

TransformerWeights extract_submodel(const TransformerWeights& target, int layers) {
  target.validate();
  PSEL_ENFORCE(layers >= 1 && layers <= target.config.layers, kConfig,
               "cannot extract " << layers << " layers from a " << target.config.layers << "-layer model");
  TransformerWeights out = target;
  out.layers.resize(layers);
  out.config.layers = layers;
  return out;
}

std::vector<double> head_scores(const LayerWeights& layer, const TransformerConfig& config) {
  const int dh = config.dh();
  std::vector<double> scores(config.heads);
  for (int h = 0; h < config.heads; ++h) {
    scores[h] = (layer.wv.middleCols(h * dh, dh) * layer.wo.middleRows(h * dh, dh)).norm();
  }
  return scores;
}

TransformerWeights prune_heads(const TransformerWeights& model, int heads) {
  model.validate();
  const TransformerConfig& c = model.config;
  PSEL_ENFORCE(heads >= 1 && heads <= c.heads, kConfig, "cannot keep " << heads << " of " << c.heads << " heads");
  const int dh = c.dh();
  TransformerWeights out = model;
  out.config.heads = heads;
  out.config.head_dim = dh;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerWeights& l = model.layers[li];
    const auto scores = head_scores(l, c);
    std::vector<int> order(c.heads);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    std::vector<int> keep(order.begin(), order.begin() + heads);
    std::sort(keep.begin(), keep.end());
    LayerWeights& o = out.layers[li];
    o.wq.resize(c.dim, heads * dh);
    o.wk.resize(c.dim, heads * dh);
    o.wv.resize(c.dim, heads * dh);
    o.wo.resize(heads * dh, c.dim);
    for (int j = 0; j < heads; ++j) {
      o.wq.middleCols(j * dh, dh) = l.wq.middleCols(keep[j] * dh, dh);
      o.wk.middleCols(j * dh, dh) = l.wk.middleCols(keep[j] * dh, dh);
      o.wv.middleCols(j * dh, dh) = l.wv.middleCols(keep[j] * dh, dh);
      o.wo.middleRows(j * dh, dh) = l.wo.middleRows(keep[j] * dh, dh);
    }
  }
  return out;
}

TransformerWeights proxy_base(const TransformerWeights& base, const ProxySpec& spec) {
  spec.validate(base.config);
  TransformerWeights out = prune_heads(extract_submodel(base, spec.layers), spec.heads);
  out.config.ffn_dim = 0;
  for (auto& l : out.layers) {
    l.ffn_w1.resize(0, 0);
    l.ffn_b1.resize(0);
    l.ffn_w2.resize(0, 0);
    l.ffn_b2.resize(0);
    l.ln2_gamma.resize(0);
    l.ln2_beta.resize(0);
  }
  return out;
}

int ProxyModel::mlp_count() const {
  return static_cast<int>(softmax_mlps.size() + ln_mlps.size()) + (entropy_mlp.w1.size() > 0 ? 1 : 0);
}

void ProxyModel::validate() const {
  weights.validate();
  const TransformerConfig& c = weights.config;
  PSEL_ENFORCE(c.layers == spec.layers && c.heads == spec.heads && c.ffn_dim == 0, kShape,
               "proxy weights do not match spec <" << spec.layers << "," << spec.heads << "," << spec.hidden << ">");
  PSEL_ENFORCE(mlp_count() == 2 * spec.layers + 1, kShape,
               "proxy holds " << mlp_count() << " MLPs, expected " << 2 * spec.layers + 1);
  for (int l = 0; l < spec.layers; ++l) {
    const MlpApprox& s = softmax_mlps[l];
    const MlpApprox& n = ln_mlps[l];
    s.validate();
    n.validate();
    PSEL_ENFORCE(s.in() == c.seq_len && s.out() == c.seq_len && s.hidden() == spec.hidden, kShape,
                 "layer " << l << " softmax MLP has shape " << s.in() << "/" << s.hidden() << "/" << s.out());
    PSEL_ENFORCE(n.in() == 1 && n.out() == 1 && n.hidden() == spec.hidden, kShape,
                 "layer " << l << " LayerNorm MLP has the wrong shape");
  }
  entropy_mlp.validate();
  PSEL_ENFORCE(entropy_mlp.in() == c.classes && entropy_mlp.out() == 1 && entropy_mlp.hidden() == spec.hidden,
               kShape, "entropy MLP has the wrong shape");
}

ProxyModel build_proxy(const TransformerWeights& base, const ProxySpec& spec, const Dataset& bootstrap,
                       const TrainConfig& train) {
  ProxyModel proxy;
  proxy.spec = spec;
  proxy.weights = proxy_base(base, spec);
  const TransformerConfig& c = proxy.weights.config;
  const TapSet taps = record_taps(proxy.weights, bootstrap);
  for (int l = 0; l < spec.layers; ++l) {
    proxy.softmax_mlps.push_back(
        fit_site(taps.at({l, SiteKind::kAttnSoftmax}), c.seq_len, spec.hidden, c.mask_value, c.ln_eps, train));
    proxy.ln_mlps.push_back(fit_site(taps.at({l, SiteKind::kLnRecip}), 1, spec.hidden, c.mask_value, c.ln_eps, train));
  }
  proxy.entropy_mlp =
      fit_site(taps.at({-1, SiteKind::kSoftmaxEntropy}), c.classes, spec.hidden, c.mask_value, c.ln_eps, train);
  proxy.validate();
  return proxy;
}

double proxy_entropy_plain(const ProxyModel& proxy, const Matrix& x, const Vector& mask) {
  const TransformerWeights& w = proxy.weights;
  const TransformerConfig& c = w.config;
  const int dh = c.dh();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix h = x;
  for (int li = 0; li < c.layers; ++li) {
    const LayerWeights& l = w.layers[li];
    const Matrix q = h * l.wq, k = h * l.wk, v = h * l.wv;
    Matrix ctx(c.seq_len, c.attn_width());
    for (int a = 0; a < c.heads; ++a) {
      const Matrix scores =
          (q.middleCols(a * dh, dh) * k.middleCols(a * dh, dh).transpose() * scale).rowwise() + mask.transpose();
      ctx.middleCols(a * dh, dh) = proxy.softmax_mlps[li].forward(scores) * v.middleCols(a * dh, dh);
    }
    const Matrix r = h + ctx * l.wo;
    const Vector mean = r.rowwise().mean();
    const Matrix centered = r.colwise() - mean;
    const Matrix var = centered.rowwise().squaredNorm() / static_cast<double>(c.dim);
    const Matrix inv = proxy.ln_mlps[li].forward(var);
    h = ((centered.array().colwise() * inv.col(0).array()).rowwise() * l.ln_gamma.transpose().array()).matrix();
    h.rowwise() += l.ln_beta.transpose();
  }
  const Eigen::RowVectorXd logits = h.row(0) * w.classifier + w.classifier_bias.transpose();
  return proxy.entropy_mlp.forward(logits)(0, 0);
}

// ---------------------------------------------------------------------------

ProxyArch proxy_arch(const ProxyModel& proxy, ProxyVariant variant) {
  return {proxy.weights.config, proxy.spec, variant};
}

namespace {

void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.data(), m.data() + m.size()); }
void append(std::vector<double>& out, const Vector& v) { out.insert(out.end(), v.data(), v.data() + v.size()); }

SharedTensor take(const SharedTensor& all, std::size_t& off, const Shape& shape) {
  SharedTensor t;
  t.party = all.party;
  t.shape = shape;
  const std::size_t n = numel(shape);
  t.share.assign(all.share.begin() + off, all.share.begin() + off + n);
  off += n;
  return t;
}

// [B*T, 3*w*dh] -> [B*w, T, dh] for part 0 (q), 1 (k) or 2 (v).
SharedTensor split_heads(const SharedTensor& qkv, std::size_t b, std::size_t t, std::size_t w, std::size_t dh,
                         int part) {
  SharedTensor out;
  out.party = qkv.party;
  out.shape = {b * w, t, dh};
  out.share.resize(b * w * t * dh);
  const std::size_t width = 3 * w * dh;
  for (std::size_t e = 0; e < b; ++e) {
    for (std::size_t h = 0; h < w; ++h) {
      for (std::size_t i = 0; i < t; ++i) {
        const RingElement* src = qkv.share.data() + (e * t + i) * width + part * w * dh + h * dh;
        std::copy(src, src + dh, out.share.data() + ((e * w + h) * t + i) * dh);
      }
    }
  }
  return out;
}

// [B*w, T, dh] -> [B*T, w*dh].
SharedTensor merge_heads(const SharedTensor& ctx, std::size_t b, std::size_t t, std::size_t w, std::size_t dh) {
  SharedTensor out;
  out.party = ctx.party;
  out.shape = {b * t, w * dh};
  out.share.resize(b * t * w * dh);
  for (std::size_t e = 0; e < b; ++e) {
    for (std::size_t h = 0; h < w; ++h) {
      for (std::size_t i = 0; i < t; ++i) {
        const RingElement* src = ctx.share.data() + ((e * w + h) * t + i) * dh;
        std::copy(src, src + dh, out.share.data() + (e * t + i) * w * dh + h * dh);
      }
    }
  }
  return out;
}

// scores[B*w, T, T] += mask[b, key] on every query row.
SharedTensor add_key_mask(Party& p, const SharedTensor& scores, const SharedTensor& mask, std::size_t b,
                          std::size_t w, std::size_t t) {
  SharedTensor out = scores;
  const Ring& r = p.ring();
  for (std::size_t e = 0; e < b; ++e) {
    for (std::size_t h = 0; h < w; ++h) {
      for (std::size_t i = 0; i < t; ++i) {
        RingElement* row = out.share.data() + ((e * w + h) * t + i) * t;
        for (std::size_t j = 0; j < t; ++j) row[j] = r.add(row[j], mask.share[e * t + j]);
      }
    }
  }
  p.add_flops(out.size());
  return out;
}

MlpShape shape_of(int in, int hidden, int out) { return {in, hidden, out}; }

}  // namespace

SharedProxy share_proxy(Party& p, int owner, const ProxyArch& arch, const ProxyModel* proxy) {
  const TransformerConfig& c = arch.config;
  c.validate();
  const std::size_t d = c.dim, a = c.attn_width(), classes = c.classes;
  const bool mine = p.id() == owner;
  if (mine) {
    PSEL_ENFORCE(proxy != nullptr, kConfig, "model owner must supply the proxy");
    if (arch.variant == ProxyVariant::kMlp) {
      proxy->validate();
    } else {
      proxy->weights.validate();
    }
    PSEL_ENFORCE(proxy->weights.config == c && proxy->spec == arch.spec, kShape,
                 "proxy does not match the announced architecture");
  }
  TagScope tag(p, "setup");
  std::vector<double> flat;
  if (mine) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.dh()));
    for (const auto& l : proxy->weights.layers) {
      Matrix wqkv(d, 3 * a);
      wqkv << l.wq * scale, l.wk, l.wv;
      append(flat, wqkv);
      append(flat, l.wo);
      if (&l != &proxy->weights.layers.back()) {
        append(flat, l.ln_gamma);
        append(flat, l.ln_beta);
      }
    }
    // Only the classifier reads the last LayerNorm, so its affine step folds
    // into the classifier weights.
    const LayerWeights& last = proxy->weights.layers.back();
    append(flat, Matrix(last.ln_gamma.asDiagonal() * proxy->weights.classifier));
    append(flat, Vector(proxy->weights.classifier.transpose() * last.ln_beta + proxy->weights.classifier_bias));
    if (c.vocab > 0) append(flat, proxy->weights.embedding);
  }
  const std::size_t per_layer = d * 3 * a + a * d + 2 * d;
  const std::size_t total = c.layers * per_layer - 2 * d + d * classes + classes + (c.vocab > 0 ? c.vocab * d : 0);
  const SharedTensor all = input(p, owner, {total}, flat);

  SharedProxy sp;
  sp.arch = arch;
  std::size_t off = 0;
  for (int li = 0; li < c.layers; ++li) {
    SharedLayer sl;
    sl.wqkv = take(all, off, {d, 3 * a});
    sl.wo = take(all, off, {a, d});
    if (li + 1 < c.layers) {
      sl.gamma = take(all, off, {d});
      sl.beta = take(all, off, {d});
    }
    sp.layers.push_back(std::move(sl));
  }
  sp.classifier = take(all, off, {d, classes});
  sp.classifier_bias = take(all, off, {classes});
  if (c.vocab > 0) sp.embedding = take(all, off, {static_cast<std::size_t>(c.vocab), d});

  if (arch.variant == ProxyVariant::kMlp) {
    const int hdim = arch.spec.hidden;
    for (int li = 0; li < c.layers; ++li) {
      sp.layers[li].softmax_mlp = share_mlp(p, owner, SiteKind::kAttnSoftmax, li, shape_of(c.seq_len, hdim, c.seq_len),
                                            mine ? &proxy->softmax_mlps[li] : nullptr);
      sp.layers[li].ln_mlp =
          share_mlp(p, owner, SiteKind::kLnRecip, li, shape_of(1, hdim, 1), mine ? &proxy->ln_mlps[li] : nullptr);
    }
    sp.entropy_mlp = share_mlp(p, owner, SiteKind::kSoftmaxEntropy, -1, shape_of(c.classes, hdim, 1),
                               mine ? &proxy->entropy_mlp : nullptr);
  }
  return sp;
}

SharedBatch share_batch(Party& p, int owner, const SharedProxy& proxy, const Dataset* data, std::size_t count) {
  const TransformerConfig& c = proxy.arch.config;
  const std::size_t t = c.seq_len, d = c.dim;
  const bool mine = p.id() == owner;
  if (mine) {
    PSEL_ENFORCE(data != nullptr, kConfig, "data owner must supply the dataset");
    data->validate();
    PSEL_ENFORCE(data->size() == count && static_cast<std::size_t>(data->seq_len) == t, kShape,
                 "dataset has " << data->size() << " examples of length " << data->seq_len << ", expected " << count
                                << " of length " << t);
    PSEL_ENFORCE(data->tokens == (c.vocab > 0), kShape, "dataset and model disagree on token inputs");
  }
  TagScope tag(p, "input");
  SharedBatch b;
  b.batch = count;
  std::vector<double> mask;
  if (mine) {
    for (std::size_t i = 0; i < count; ++i) {
      const Vector m = data->mask(i, c.mask_value);
      mask.insert(mask.end(), m.data(), m.data() + m.size());
    }
  }
  b.mask = input(p, owner, {count, t}, mask);
  if (c.vocab > 0) {
    const std::size_t v = c.vocab;
    std::vector<double> onehot;
    if (mine) {
      onehot.assign(count * t * v, 0.0);
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < t; ++j) onehot[(i * t + j) * v + data->token_ids[i][j]] = 1.0;
      }
    }
    b.x = matmul(p, input(p, owner, {count * t, v}, onehot), proxy.embedding);
  } else {
    std::vector<double> rows;
    if (mine) {
      rows.reserve(count * t * d);
      for (std::size_t i = 0; i < count; ++i) {
        PSEL_ENFORCE(static_cast<std::size_t>(data->dim) == d, kShape, "dataset dim " << data->dim << " != " << d);
        append(rows, data->embedded[i]);
      }
    }
    b.x = input(p, owner, {count * t, d}, rows);
  }
  return b;
}

SharedBatch slice_batch(const SharedBatch& b, std::size_t seq_len, std::span<const std::size_t> rows) {
  std::vector<std::size_t> token_rows;
  token_rows.reserve(rows.size() * seq_len);
  for (std::size_t r : rows) {
    PSEL_ENFORCE(r < b.batch, kShape, "example " << r << " outside batch of " << b.batch);
    for (std::size_t j = 0; j < seq_len; ++j) token_rows.push_back(r * seq_len + j);
  }
  SharedBatch out;
  out.batch = rows.size();
  out.x = gather_rows(b.x, token_rows);
  out.mask = gather_rows(b.mask, rows);
  return out;
}

SharedTensor forward_entropy_mpc(Party& p, const SharedProxy& proxy, const SharedBatch& batch) {
  const TransformerConfig& c = proxy.arch.config;
  const bool mlp = proxy.arch.variant == ProxyVariant::kMlp;
  const std::size_t b = batch.batch, t = c.seq_len, d = c.dim, w = c.heads, dh = c.dh();
  PSEL_ENFORCE(batch.x.shape == Shape({b * t, d}) && batch.mask.shape == Shape({b, t}), kShape,
               "batch tensors " << shape_str(batch.x.shape) << " / " << shape_str(batch.mask.shape)
                                << " do not fit " << b << " examples");
  SharedTensor h = batch.x;
  for (int li = 0; li < c.layers; ++li) {
    const SharedLayer& l = proxy.layers[li];
    SharedTensor qkv;
    {
      TagScope tag(p, "qkv");
      qkv = matmul(p, h, l.wqkv);
    }
    SharedTensor scores;
    {
      TagScope tag(p, "attn_matmul");
      scores = matmul(p, split_heads(qkv, b, t, w, dh, 0), transpose_last(split_heads(qkv, b, t, w, dh, 1)));
      scores = add_key_mask(p, scores, batch.mask, b, w, t);
    }
    SharedTensor prob;
    if (mlp) {
      TagScope tag(p, "attn_softmax_mlp");
      prob = reshape(mlp_forward_mpc(p, l.softmax_mlp, reshape(scores, {b * w * t, t})), {b * w, t, t});
    } else {
      TagScope tag(p, "softmax");
      prob = softmax_baseline(p, scores);
    }
    SharedTensor ctx;
    {
      TagScope tag(p, "attn_matmul");
      ctx = merge_heads(matmul(p, prob, split_heads(qkv, b, t, w, dh, 2)), b, t, w, dh);
    }
    {
      TagScope tag(p, "attn_out");
      h = add(p, h, matmul(p, ctx, l.wo));
    }
    if (mlp) {
      TagScope tag(p, "ln_mlp");
      const double inv_dim = 1.0 / static_cast<double>(d);
      const SharedTensor mean = mul_public(p, sum_last(p, h), inv_dim);
      const SharedTensor centered = add_broadcast(p, h, neg(p, mean), BroadcastAxis::kRows);
      const SharedTensor var = mul_public(p, sum_last(p, square(p, centered)), inv_dim);
      const SharedTensor inv = mlp_forward_mpc(p, l.ln_mlp, reshape(var, {b * t, 1}));
      h = mul_broadcast(p, centered, reshape(inv, {b * t}), BroadcastAxis::kRows);
      if (!l.gamma.share.empty()) {
        h = add_broadcast(p, mul_broadcast(p, h, l.gamma, BroadcastAxis::kCols), l.beta, BroadcastAxis::kCols);
      }
    } else {
      TagScope tag(p, "layernorm");
      h = layernorm_baseline(p, h, l.gamma, l.beta, c.ln_eps);
    }
  }
  SharedTensor logits;
  {
    TagScope tag(p, "classifier");
    std::vector<std::size_t> cls(b);
    for (std::size_t e = 0; e < b; ++e) cls[e] = e * t;
    logits = add_broadcast(p, matmul(p, gather_rows(h, cls), proxy.classifier), proxy.classifier_bias,
                           BroadcastAxis::kCols);
  }
  if (mlp) {
    TagScope tag(p, "entropy_mlp");
    return reshape(mlp_forward_mpc(p, proxy.entropy_mlp, logits), {b});
  }
  TagScope tag(p, "entropy");
  return reshape(entropy_baseline(p, logits), {b});
}

}  // namespace psel
