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

#include "psel/approx.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "psel/error.h"
#include "psel/protocols.h"

namespace psel {

GaussianEstimate estimate_gaussian(std::span<const double> samples) {
  PSEL_ENFORCE(samples.size() >= 2, kShape,
               "Gaussian estimate needs at least 2 samples, got " << samples.size());
  // Two-pass for accuracy on large streams.
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(samples.size()))};
}

GaussianEstimate estimate_site(const TapStream& taps) {
  std::vector<double> pool;
  for (std::size_t r = 0; r < taps.inputs.size(); ++r) {
    const auto& row = taps.inputs[r];
    std::size_t n = row.size();
    if (taps.site == SiteKind::kAttnSoftmax && r < taps.lengths.size()) {
      n = std::min(n, static_cast<std::size_t>(taps.lengths[r]));
    }
    pool.insert(pool.end(), row.begin(), row.begin() + static_cast<long>(n));
  }
  return estimate_gaussian(pool);
}

Matrix synthesize(SiteKind site, const GaussianEstimate& est, std::size_t n, int width, CounterPrng& rng) {
  PSEL_ENFORCE(est.stddev >= 0.0 && std::isfinite(est.mean), kConfig, "invalid Gaussian estimate");
  PSEL_ENFORCE(width >= 1, kShape, "synthesis width must be positive");
  Matrix x(static_cast<long>(n), width);
  if (est.stddev == 0.0) {
    x.setConstant(est.mean);
  } else {
    std::normal_distribution<double> dist(est.mean, est.stddev);
    for (long i = 0; i < x.size(); ++i) {
      double v = dist(rng);
      if (site == SiteKind::kLnRecip) {
        for (int tries = 0; v <= 0.0 && tries < 64; ++tries) v = dist(rng);
        PSEL_ENFORCE(v > 0.0, kTraining, "variance distribution has no positive mass");
      }
      x.data()[i] = v;
    }
  }
  if (site == SiteKind::kLnRecip) {
    PSEL_ENFORCE((x.array() > 0.0).all(), kTraining, "variance estimate is not positive");
  }
  return x;
}

LabeledSet make_targets(SiteKind site, Matrix inputs, double mask_value, double ln_eps, CounterPrng& rng) {
  LabeledSet out;
  const long n = inputs.rows(), w = inputs.cols();
  switch (site) {
    case SiteKind::kAttnSoftmax: {
      std::uniform_int_distribution<long> len(1, w);
      for (long i = 0; i < n; ++i) {
        const long valid = len(rng);
        for (long j = valid; j < w; ++j) inputs(i, j) += mask_value;
      }
      out.targets = softmax_rows(inputs);
      break;
    }
    case SiteKind::kLnRecip:
      PSEL_ENFORCE(w == 1, kShape, "ln_recip inputs are scalars");
      out.targets = (inputs.array() + ln_eps).rsqrt().matrix();
      break;
    case SiteKind::kSoftmaxEntropy:
      out.targets.resize(n, 1);
      for (long i = 0; i < n; ++i) out.targets(i, 0) = entropy_of_logits(inputs.row(i).transpose());
      break;
  }
  out.inputs = std::move(inputs);
  return out;
}

void TrainConfig::validate() const {
  PSEL_ENFORCE(samples >= 16, kConfig, "training needs at least 16 samples");
  PSEL_ENFORCE(learning_rate > 0 && std::isfinite(learning_rate), kConfig, "learning rate must be positive");
  PSEL_ENFORCE(epochs >= 1, kConfig, "epochs must be at least 1");
  PSEL_ENFORCE(batch_size >= 1, kConfig, "batch size must be at least 1");
  PSEL_ENFORCE(momentum >= 0 && momentum < 1, kConfig, "momentum must be in [0, 1)");
  PSEL_ENFORCE(heldout_fraction > 0 && heldout_fraction < 1, kConfig, "held-out fraction must be in (0, 1)");
}

std::size_t MlpApprox::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

Matrix MlpApprox::forward(const Matrix& x) const {
  PSEL_ENFORCE(x.cols() == w1.rows(), kShape, "MLP input width " << x.cols() << ", expected " << w1.rows());
  const Matrix h = ((x * w1).rowwise() + b1.transpose()).cwiseMax(0.0);
  return (h * w2).rowwise() + b2.transpose();
}

void MlpApprox::validate() const {
  PSEL_ENFORCE(w1.cols() == b1.size() && w2.rows() == w1.cols() && w2.cols() == b2.size() && w1.cols() >= 1,
               kShape, "inconsistent MLP weight shapes");
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  PSEL_ENFORCE(a.rows() == b.rows() && a.cols() == b.cols(), kShape, "MSE operands differ in shape");
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

namespace {

Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<long>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<long>(i)) = m.row(static_cast<long>(idx[i]));
  return out;
}

struct ColumnStats {
  Eigen::RowVectorXd mean, scale;
};

ColumnStats column_stats(const Matrix& m) {
  ColumnStats s;
  s.mean = m.colwise().mean();
  s.scale = ((m.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
  for (long j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  }
  return s;
}

Matrix standardize(const Matrix& m, const ColumnStats& s) {
  return ((m.rowwise() - s.mean).array().rowwise() / s.scale.array()).matrix();
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  PSEL_ENFORCE(a.size() == b.size() && a.size() >= 2, kShape, "spearman needs two equal series of length >= 2");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

MlpApprox train_mlp(SiteKind site, int layer, const LabeledSet& data, int hidden, const TrainConfig& cfg) {
  cfg.validate();
  PSEL_ENFORCE(hidden >= 1, kConfig, "MLP hidden dimension must be at least 1");
  const long n = data.inputs.rows(), in = data.inputs.cols(), out = data.targets.cols();
  PSEL_ENFORCE(n >= 2 && data.targets.rows() == n && in >= 1 && out >= 1, kShape,
               "labeled set is empty or inconsistent");

  // Held-out split.
  CounterPrng split_rng(cfg.seed, 1);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.heldout_fraction * static_cast<double>(n))), 1,
      static_cast<std::size_t>(n - 1));
  const std::span<const std::size_t> held_idx(order.data(), n_held);
  const std::span<const std::size_t> train_idx(order.data() + n_held, order.size() - n_held);

  const Matrix x_train = take_rows(data.inputs, train_idx);
  const Matrix y_train = take_rows(data.targets, train_idx);
  const ColumnStats xs = column_stats(x_train), ys = column_stats(y_train);
  const Matrix xn = standardize(x_train, xs), yn = standardize(y_train, ys);

  // Hidden unit j draws its weights from its own stream, so a wider network
  // starts from a superset of a narrower one's units.
  Matrix w1(in, hidden), w2(hidden, out);
  for (int j = 0; j < hidden; ++j) {
    CounterPrng unit_rng(cfg.seed, 100 + static_cast<std::uint64_t>(j));
    std::normal_distribution<double> d1(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    std::normal_distribution<double> d2(0.0, std::sqrt(1.0 / static_cast<double>(hidden)));
    for (long i = 0; i < in; ++i) w1(i, j) = d1(unit_rng);
    for (long o = 0; o < out; ++o) w2(j, o) = d2(unit_rng);
  }
  Vector b1 = Vector::Zero(hidden), b2 = Vector::Zero(out);
  Matrix vw1 = Matrix::Zero(in, hidden), vw2 = Matrix::Zero(hidden, out);
  Vector vb1 = Vector::Zero(hidden), vb2 = Vector::Zero(out);

  CounterPrng shuffle_rng(cfg.seed, 2);
  std::vector<std::size_t> perm(train_idx.size());
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t bs = std::min(cfg.batch_size, perm.size());
  const std::size_t steps_per_epoch = (perm.size() + bs - 1) / bs;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  const double pi = std::acos(-1.0);
  std::size_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += bs, ++step) {
      const std::size_t m = std::min(bs, perm.size() - start);
      const std::span<const std::size_t> idx(perm.data() + start, m);
      const Matrix xb = take_rows(xn, idx), yb = take_rows(yn, idx);
      const Matrix z = (xb * w1).rowwise() + b1.transpose();
      const Matrix h = z.cwiseMax(0.0);
      const Matrix err = ((h * w2).rowwise() + b2.transpose()) - yb;
      const double loss = err.squaredNorm() / static_cast<double>(err.size());
      PSEL_ENFORCE(std::isfinite(loss), kTraining,
                   site_name(site) << " layer " << layer << " (hidden " << hidden << "): loss diverged at epoch "
                                   << epoch << ", step " << step << " with learning rate " << cfg.learning_rate);
      epoch_loss += loss * static_cast<double>(m);

      const Matrix dy = err * (2.0 / static_cast<double>(err.size()));
      const Matrix gw2 = h.transpose() * dy;
      const Vector gb2 = dy.colwise().sum().transpose();
      const Matrix dh = ((dy * w2.transpose()).array() * (z.array() > 0.0).cast<double>()).matrix();
      const Matrix gw1 = xb.transpose() * dh;
      const Vector gb1 = dh.colwise().sum().transpose();

      const double lr = cfg.learning_rate * 0.5 * (1.0 + std::cos(pi * static_cast<double>(step) / total_steps));
      vw1 = cfg.momentum * vw1 - lr * gw1;
      vb1 = cfg.momentum * vb1 - lr * gb1;
      vw2 = cfg.momentum * vw2 - lr * gw2;
      vb2 = cfg.momentum * vb2 - lr * gb2;
      w1 += vw1;
      b1 += vb1;
      w2 += vw2;
      b2 += vb2;
    }
    PSEL_ENFORCE(std::isfinite(epoch_loss), kTraining, site_name(site) << ": non-finite epoch loss");
  }

  // Fold the standardization into the weights:
  // x_n = (x - mx) / sx and y = y_n * sy + my.
  MlpApprox mlp;
  mlp.site = site;
  mlp.layer = layer;
  mlp.w1 = (w1.array().colwise() / xs.scale.transpose().array()).matrix();
  mlp.b1 = b1 - ((xs.mean.array() / xs.scale.array()).matrix() * w1).transpose();
  mlp.w2 = (w2.array().rowwise() * ys.scale.array()).matrix();
  mlp.b2 = (b2.transpose().array() * ys.scale.array() + ys.mean.array()).matrix().transpose();
  PSEL_ENFORCE(mlp.w1.allFinite() && mlp.w2.allFinite() && mlp.b1.allFinite() && mlp.b2.allFinite(),
               kTraining, site_name(site) << ": trained weights are not finite");

  mlp.train_mse = mean_squared_error(mlp.forward(x_train), y_train);
  const Matrix x_held = take_rows(data.inputs, held_idx), y_held = take_rows(data.targets, held_idx);
  mlp.heldout_mse = mean_squared_error(mlp.forward(x_held), y_held);
  return mlp;
}

MlpApprox fit_site(const TapStream& taps, int width, int hidden, double mask_value, double ln_eps,
                   const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t in = static_cast<std::size_t>(width);
  const std::size_t out = taps.site == SiteKind::kSoftmaxEntropy ? 1 : in;
  const std::size_t params = in * hidden + hidden + hidden * out + out;
  PSEL_ENFORCE(cfg.samples >= 10 * params, kConfig,
               site_name(taps.site) << ": " << cfg.samples << " synthetic samples is under ten per parameter ("
                                    << params << " parameters)");
  const GaussianEstimate est = estimate_site(taps);
  const std::uint64_t stream = 1000 + 16 * static_cast<std::uint64_t>(taps.layer + 1) +
                               static_cast<std::uint64_t>(taps.site);
  CounterPrng rng(cfg.seed, stream);
  Matrix x = synthesize(taps.site, est, cfg.samples, width, rng);
  const LabeledSet set = make_targets(taps.site, std::move(x), mask_value, ln_eps, rng);
  TrainConfig run = cfg;
  run.seed = derive_seed(cfg.seed, std::to_string(stream));
  return train_mlp(taps.site, taps.layer, set, hidden, run);
}

// ---------------------------------------------------------------------------

SharedMlp share_mlp(Party& p, int owner, SiteKind site, int layer, const MlpShape& shape,
                    const MlpApprox* mlp) {
  PSEL_ENFORCE(shape.in >= 1 && shape.hidden >= 1 && shape.out >= 1, kShape, "invalid MLP shape");
  const std::size_t in = shape.in, h = shape.hidden, out = shape.out;
  const std::size_t total = in * h + h + h * out + out;
  std::vector<double> flat;
  if (p.id() == owner) {
    PSEL_ENFORCE(mlp != nullptr, kConfig, "MLP owner must supply weights");
    PSEL_ENFORCE(mlp->in() == shape.in && mlp->hidden() == shape.hidden && mlp->out() == shape.out, kShape,
                 "MLP weights do not match the announced shape");
    flat.reserve(total);
    flat.insert(flat.end(), mlp->w1.data(), mlp->w1.data() + mlp->w1.size());
    flat.insert(flat.end(), mlp->b1.data(), mlp->b1.data() + mlp->b1.size());
    flat.insert(flat.end(), mlp->w2.data(), mlp->w2.data() + mlp->w2.size());
    flat.insert(flat.end(), mlp->b2.data(), mlp->b2.data() + mlp->b2.size());
  }
  const SharedTensor all = input(p, owner, {total}, flat);
  auto piece = [&](std::size_t off, const Shape& s) {
    SharedTensor t;
    t.party = p.id();
    t.shape = s;
    t.share.assign(all.share.begin() + off, all.share.begin() + off + numel(s));
    return t;
  };
  SharedMlp m;
  m.site = site;
  m.layer = layer;
  m.w1 = piece(0, {in, h});
  m.b1 = piece(in * h, {h});
  m.w2 = piece(in * h + h, {h, out});
  m.b2 = piece(in * h + h + h * out, {out});
  return m;
}

SharedTensor mlp_forward_mpc(Party& p, const SharedMlp& mlp, const SharedTensor& x) {
  PSEL_ENFORCE(x.shape.size() == 2 && x.shape[1] == mlp.w1.shape[0], kShape,
               "MLP input " << shape_str(x.shape) << " does not match weights " << shape_str(mlp.w1.shape));
  const SharedTensor h = relu(p, add_broadcast(p, matmul(p, x, mlp.w1), mlp.b1, BroadcastAxis::kCols));
  return add_broadcast(p, matmul(p, h, mlp.w2), mlp.b2, BroadcastAxis::kCols);
}

}  // namespace psel
