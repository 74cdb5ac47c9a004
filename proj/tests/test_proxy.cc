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
#include "psel/proxy.h"
#include "test_util.h"

namespace psel {
namespace {

TransformerConfig small_config() {
  TransformerConfig c;
  c.layers = 2;
  c.heads = 4;
  c.dim = 16;
  c.seq_len = 16;
  c.ffn_dim = 32;
  return c;
}

TrainConfig quick() {
  TrainConfig t;
  t.samples = 4096;
  t.epochs = 5;
  t.batch_size = 64;
  return t;
}

// Entropies of `data` from one two-party run of `proxy`.
std::vector<double> mpc_entropies(const ProxyModel& proxy, ProxyVariant variant, const Dataset& data,
                                  CostLedger* ledger = nullptr, bool* clean = nullptr) {
  const auto cfg = testing::session(5);
  const ProxyArch arch = proxy_arch(proxy, variant);
  auto run = run_two_party(cfg, [&](Party& p) {
    const SharedProxy sp = share_proxy(p, 0, arch, p.id() == 0 ? &proxy : nullptr);
    const SharedBatch b = share_batch(p, 1, sp, p.id() == 1 ? &data : nullptr, data.size());
    return forward_entropy_mpc(p, sp, b);
  });
  if (ledger) *ledger = run.ledgers[0];
  if (clean) *clean = run.reveals[0].entries().empty() && run.reveals[1].entries().empty();
  return testing::open(run, cfg);
}

TEST_SUITE("proxy") {
  TEST_CASE("submodel keeps the bottom layers and the classifier") {
    const auto w = random_weights(small_config(), 11);
    const auto s = extract_submodel(w, 1);
    CHECK(s.config.layers == 1);
    REQUIRE(s.layers.size() == 1);
    CHECK(s.layers[0].wq == w.layers[0].wq);
    CHECK(s.classifier == w.classifier);
    CHECK_THROWS_AS(extract_submodel(w, 0), Error);
    CHECK_THROWS_AS(extract_submodel(w, 3), Error);
  }

  TEST_CASE("head scores match a loop-level Frobenius norm") {
    const auto w = random_weights(small_config(), 11);
    const auto& l = w.layers[1];
    const int dh = w.config.dh();
    const auto scores = head_scores(l, w.config);
    for (int h = 0; h < w.config.heads; ++h) {
      double sq = 0.0;
      for (int i = 0; i < w.config.dim; ++i) {
        for (int j = 0; j < w.config.dim; ++j) {
          double v = 0.0;
          for (int k = 0; k < dh; ++k) v += l.wv(i, h * dh + k) * l.wo(h * dh + k, j);
          sq += v * v;
        }
      }
      CHECK(scores[h] == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
    }
  }

  TEST_CASE("pruning keeps the top heads in their original order") {
    auto w = random_weights(small_config(), 11);
    const int dh = w.config.dh();
    // Make heads 3 and 1 dominate layer 0.
    w.layers[0].wv.middleCols(3 * dh, dh) *= 10.0;
    w.layers[0].wv.middleCols(1 * dh, dh) *= 5.0;
    const auto p = prune_heads(w, 2);
    CHECK(p.config.heads == 2);
    CHECK(p.config.dh() == dh);
    CHECK(p.layers[0].wq.middleCols(0, dh) == w.layers[0].wq.middleCols(1 * dh, dh));
    CHECK(p.layers[0].wq.middleCols(dh, dh) == w.layers[0].wq.middleCols(3 * dh, dh));
    CHECK(p.layers[0].wo.middleRows(dh, dh) == w.layers[0].wo.middleRows(3 * dh, dh));
    CHECK_THROWS_AS(prune_heads(w, 5), Error);
  }

  TEST_CASE("pruning to every head leaves the forward pass unchanged") {
    const auto w = random_weights(small_config(), 11);
    const auto data = random_dataset(w.config, 3, 12);
    const auto p = prune_heads(w, w.config.heads);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto a = forward(w, data.input(i, w), data.mask(i, w.config.mask_value));
      const auto b = forward(p, data.input(i, p), data.mask(i, p.config.mask_value));
      CHECK(a.entropy == doctest::Approx(b.entropy).epsilon(1e-12));
    }
  }

  TEST_CASE("proxy skeleton drops feed-forward blocks") {
    const auto w = random_weights(small_config(), 11);
    const auto b = proxy_base(w, {1, 2, 4});
    CHECK(b.config.ffn_dim == 0);
    CHECK(b.config.layers == 1);
    CHECK(b.layers[0].ffn_w1.size() == 0);
    CHECK_NOTHROW(b.validate());
    CHECK_THROWS_AS(proxy_base(w, {3, 1, 2}), Error);
    CHECK_THROWS_AS(proxy_base(w, {1, 1, 0}), Error);
  }

  TEST_CASE("built proxy carries 2l+1 MLPs") {
    const auto w = random_weights(small_config(), 11);
    const auto data = random_dataset(w.config, 16, 12);
    for (int l = 1; l <= 2; ++l) {
      const auto p = build_proxy(w, {l, 2, 4}, data, quick());
      CHECK(p.mlp_count() == 2 * l + 1);
      CHECK(p.softmax_mlps.size() == static_cast<std::size_t>(l));
      CHECK(p.softmax_mlps[0].w1.rows() == w.config.seq_len);
      CHECK_NOTHROW(p.validate());
    }
  }

  TEST_CASE("baseline MPC proxy tracks the plaintext skeleton") {
    const auto w = random_weights(small_config(), 11);
    const auto data = random_dataset(w.config, 4, 12);
    const auto proxy = build_proxy(w, {1, 2, 4}, data, quick());
    CostLedger ledger;
    bool clean = false;
    const auto y = mpc_entropies(proxy, ProxyVariant::kBaseline, data, &ledger, &clean);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto ref = forward(proxy.weights, data.input(i, proxy.weights),
                               data.mask(i, proxy.weights.config.mask_value));
      CHECK(std::fabs(y[i] - ref.entropy) < 3e-2);
    }
    CHECK(clean);
    CHECK(ledger.tags().count("softmax") == 1);
    CHECK(ledger.tags().count("attn_softmax_mlp") == 0);
  }

  TEST_CASE("MLP MPC proxy tracks its plaintext mirror") {
    const auto w = random_weights(small_config(), 11);
    const auto data = random_dataset(w.config, 4, 12);
    const auto proxy = build_proxy(w, {2, 2, 4}, data, quick());
    CostLedger ledger;
    bool clean = false;
    const auto y = mpc_entropies(proxy, ProxyVariant::kMlp, data, &ledger, &clean);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double ref =
          proxy_entropy_plain(proxy, data.input(i, proxy.weights), data.mask(i, proxy.weights.config.mask_value));
      CHECK(std::fabs(y[i] - ref) < 1e-2);
    }
    CHECK(clean);
    CHECK(ledger.tags().count("attn_softmax_mlp") == 1);
    CHECK(ledger.tags().count("entropy_mlp") == 1);
    CHECK(ledger.tags().count("softmax") == 0);
  }
}

}  // namespace
}  // namespace psel
