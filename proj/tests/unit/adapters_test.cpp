#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "structadapt/adapters.hpp"
#include "structadapt/backbone.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace structadapt;
using namespace structadapt::model;
using namespace structadapt::test;
using ad::Tensor;

namespace {

Tensor identity(std::size_t n) {
  auto t = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1;
  return t;
}

Tensor ones(std::size_t r, std::size_t c) {
  auto t = Tensor::zeros(r, c);
  std::fill(t.data().begin(), t.data().end(), 1.0);
  return t;
}

StructWeights random_struct(std::size_t d, std::size_t m, std::size_t rels, std::mt19937_64& rng) {
  StructWeights w;
  w.ln_gain = random_tensor(1, d, rng);
  w.ln_bias = random_tensor(1, d, rng);
  w.conv = random_tensor(m, d, rng);
  for (std::size_t r = 0; r < rels; ++r) w.rel.push_back(random_tensor(m, d, rng));
  w.up = random_tensor(d, m, rng);
  return w;
}

}  // namespace

TEST(Gcn, IsolatedPositionIsSelfTerm) {
  std::mt19937_64 rng(1);
  auto h = random_tensor(1, 3, rng), w = random_tensor(2, 3, rng);
  auto g = gcn_conv(h, graph_from(1, {}), w);
  auto expect = ad::linear(h, w);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(g(0, i), expect(0, i));
}

TEST(Gcn, TwoPositionHandCase) {
  // Edge 0 -> 1: N(1) = {0, 1}, d_1 = 2, d_0 = 1.
  auto h = Tensor::from(2, 2, {1, 0, 0, 1});
  auto g = gcn_conv(h, graph_from(2, {{0, 1}}), identity(2));
  EXPECT_NEAR(g(1, 0), 1 / std::sqrt(2.0), 1e-15);  // from h_0, 1/sqrt(2*1)
  EXPECT_NEAR(g(1, 1), 0.5, 1e-15);                 // self, 1/sqrt(2*2)
  EXPECT_NEAR(g(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(g(0, 1), 0.0, 1e-15);
}

TEST(Gcn, TotalDegreeVariant) {
  auto h = Tensor::from(2, 2, {1, 0, 0, 1});
  auto g = gcn_conv(h, graph_from(2, {{0, 1}}), identity(2), repr::RelationTable::default_reverse(),
                    GcnDegree::kTotalPlusSelf);
  EXPECT_NEAR(g(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(g(1, 1), 0.5, 1e-15);
}

TEST(Gcn, MatchesDenseOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + trial % 7;
    auto tg = random_token_graph(n, 0.3, rng);
    auto h = random_tensor(n, 5, rng), w = random_tensor(3, 5, rng);
    EXPECT_LE(max_abs_diff(to_dense(gcn_conv(h, tg, w)), dense_gcn(to_dense(h), tg, to_dense(w))), 1e-12);
  }
}

TEST(Rgcn, SingleDefaultNeighbour) {
  std::mt19937_64 rng(2);
  auto h = random_tensor(2, 3, rng);
  std::vector<Tensor> w = {random_tensor(3, 3, rng), random_tensor(3, 3, rng)};
  auto g = rgcn_conv(h, graph_from(2, {{0, 1}}), w);
  auto expect = ad::linear(ad::slice_rows(h, 0, 1), w[0]);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g(1, i), expect(0, i));
}

TEST(Rgcn, MeanOverIdenticalNeighbours) {
  auto h = Tensor::from(3, 2, {1, 2, 1, 2, 5, 5});
  std::vector<Tensor> w = {identity(2), identity(2)};
  repr::TokenGraph tg;
  tg.seq_len = 3;
  tg.edges = {{0, 2, 0}, {1, 2, 0}};
  auto g = rgcn_conv(h, tg, w);
  EXPECT_DOUBLE_EQ(g(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(g(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.0);  // no in-neighbours, no self term
}

TEST(Rgcn, MatchesDenseOracleOnSixNodeGraphs) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto tg = random_token_graph(6, 0.35, rng);
    auto h = random_tensor(6, 4, rng);
    std::vector<Tensor> w = {random_tensor(3, 4, rng), random_tensor(3, 4, rng)};
    EXPECT_LE(max_abs_diff(to_dense(rgcn_conv(h, tg, w)), dense_rgcn(to_dense(h), tg, {to_dense(w[0]), to_dense(w[1])})),
              1e-12);
  }
}

TEST(Rgcn, UnknownRelationIsAnError) {
  repr::TokenGraph tg;
  tg.seq_len = 2;
  tg.edges = {{0, 1, 5}};
  std::vector<Tensor> w = {identity(2), identity(2)};
  EXPECT_THROW(rgcn_conv(ones(2, 2), tg, w), std::out_of_range);
}

TEST(Convolutions, PermutationEquivariantOnExactArithmetic) {
  // Integer features and a directed 4-cycle: every weight is 1/2 or 1, so
  // all sums are exact and the outputs must agree bit for bit.
  auto h = Tensor::from(4, 2, {1, 2, -3, 4, 5, -6, 7, 8});
  auto w = Tensor::from(2, 2, {1, -1, 2, 3});
  auto tg = graph_from(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  auto g = gcn_conv(h, tg, w);
  auto gp = gcn_conv(permute_rows(h, perm), permute(tg, perm), w);
  auto r = rgcn_conv(h, tg, {w, identity(2)});
  auto rp = rgcn_conv(permute_rows(h, perm), permute(tg, perm), {w, identity(2)});
  EXPECT_EQ(to_dense(permute_rows(g, perm)), to_dense(gp));
  EXPECT_EQ(to_dense(permute_rows(r, perm)), to_dense(rp));
}

TEST(Convolutions, PermutationEquivariantOnRandomGraphs) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = 3 + trial % 6;
    auto tg = random_token_graph(n, 0.4, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto h = random_tensor(n, 4, rng), w = random_tensor(4, 4, rng), w2 = random_tensor(4, 4, rng);
    EXPECT_LE(max_abs_diff(to_dense(permute_rows(gcn_conv(h, tg, w), perm)),
                           to_dense(gcn_conv(permute_rows(h, perm), permute(tg, perm), w))),
              1e-13);
    EXPECT_LE(max_abs_diff(to_dense(permute_rows(rgcn_conv(h, tg, {w, w2}), perm)),
                           to_dense(rgcn_conv(permute_rows(h, perm), permute(tg, perm), {w, w2}))),
              1e-13);
  }
}

TEST(Basis, SingleSharedBasis) {
  std::mt19937_64 rng(3);
  auto coef = ones(3, 1);
  auto bases = random_tensor(1, 2 * 4, rng);
  auto ws = basis_weights(coef, bases, 2, 4);
  ASSERT_EQ(ws.size(), 3u);
  for (const auto& w : ws) EXPECT_EQ(to_dense(w), to_dense(ws[0]));
  EXPECT_EQ(to_dense(ws[0]), to_dense(ad::reshape(bases, 2, 4)));
}

TEST(Basis, IdentityCoefficientsGiveIndependentMatrices) {
  std::mt19937_64 rng(4);
  auto bases = random_tensor(3, 2 * 4, rng);
  auto ws = basis_weights(identity(3), bases, 2, 4);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(to_dense(ws[r]), to_dense(ad::reshape(ad::slice_rows(bases, r, 1), 2, 4)));
}

TEST(Basis, Gradients) {
  std::mt19937_64 rng(5);
  auto coef = random_tensor(2, 2, rng), bases = random_tensor(2, 3 * 4, rng), h = random_tensor(5, 4, rng);
  auto tg = random_token_graph(5, 0.4, rng);
  auto rep = gradcheck([&] { return project(rgcn_conv(h, tg, basis_weights(coef, bases, 3, 4))); }, {coef, bases, h});
  EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(Adapters, ZeroUpProjectionIsIdentity) {
  std::mt19937_64 rng(6);
  auto h = random_tensor(5, 8, rng);
  auto g = random_tensor(1, 8, rng), b = random_tensor(1, 8, rng), down = random_tensor(4, 8, rng);
  EXPECT_EQ(to_dense(adapt_forward(h, g, b, down, Tensor::zeros(8, 4))), to_dense(h));
  auto tg = random_token_graph(5, 0.4, rng);
  for (auto v : {AdapterVariant::kStructGcn, AdapterVariant::kStructRgcn}) {
    auto w = random_struct(8, 4, 2, rng);
    w.up = Tensor::zeros(8, 4);
    EXPECT_EQ(to_dense(structadapt_forward(h, tg, w, v)), to_dense(h));
  }
}

TEST(Adapters, OutputWidthIndependentOfHidden) {
  std::mt19937_64 rng(7);
  auto h = random_tensor(3, 8, rng);
  for (std::size_t m : {1, 4, 32}) {
    auto y = adapt_forward(h, ones(1, 8), Tensor::zeros(1, 8), random_tensor(m, 8, rng), random_tensor(8, m, rng));
    EXPECT_EQ(y.rows(), 3u);
    EXPECT_EQ(y.cols(), 8u);
  }
}

TEST(Adapters, OnlyStructuralAdaptersSeeAdjacency) {
  std::mt19937_64 rng(8);
  auto h = random_tensor(5, 8, rng);
  auto tg = graph_from(5, {{0, 1}, {1, 2}, {3, 4}});
  auto changed = graph_from(5, {{0, 1}, {1, 2}, {3, 4}, {4, 0}});
  auto w = random_struct(8, 4, 2, rng);
  for (auto v : {AdapterVariant::kStructGcn, AdapterVariant::kStructRgcn}) {
    EXPECT_GT(max_abs_diff(to_dense(structadapt_forward(h, tg, w, v)), to_dense(structadapt_forward(h, changed, w, v))),
              1e-6);
  }
  AdapterConfig cfg;
  cfg.variant = AdapterVariant::kAdapt;
  cfg.hidden = 4;
  ParameterStore store;
  init_adapters(store, 1, 8, cfg, 1);
  auto rels = repr::RelationTable::default_reverse();
  EXPECT_EQ(to_dense(apply_encoder_adapter(store, 0, cfg, h, &tg, rels)),
            to_dense(apply_encoder_adapter(store, 0, cfg, h, &changed, rels)));
}

TEST(Adapters, AdaptGradients) {
  std::mt19937_64 rng(9);
  auto h = random_tensor(4, 8, rng), g = random_tensor(1, 8, rng), b = random_tensor(1, 8, rng);
  auto down = random_tensor(4, 8, rng), up = random_tensor(8, 4, rng);
  auto rep = gradcheck([&] { return project(adapt_forward(h, g, b, down, up)); }, {h, g, b, down, up});
  EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(Adapters, StructuralGradients) {
  std::mt19937_64 rng(10);
  auto h = random_tensor(5, 8, rng);
  auto tg = random_token_graph(5, 0.4, rng);
  for (auto v : {AdapterVariant::kStructGcn, AdapterVariant::kStructRgcn}) {
    auto w = random_struct(8, 4, 2, rng);
    std::vector<Tensor> inputs = {h, w.ln_gain, w.ln_bias, w.up};
    if (v == AdapterVariant::kStructGcn) {
      inputs.push_back(w.conv);
    } else {
      inputs.insert(inputs.end(), w.rel.begin(), w.rel.end());
    }
    auto rep = gradcheck([&] { return project(structadapt_forward(h, tg, w, v)); }, inputs);
    EXPECT_LE(rep.max_rel_error, 1e-4) << to_string(v) << " " << rep.worst;
  }
}

TEST(ParamCount, AdaptAndGcnMatch) {
  BackboneConfig bb{2, 16, 2, 32, 40, 24};
  for (std::size_t m : {4, 8, 16}) {
    AdapterConfig a{AdapterVariant::kAdapt, m};
    AdapterConfig g{AdapterVariant::kStructGcn, m};
    EXPECT_EQ(count_params(make_bundle(bb, a, 1), TrainMode::kAdaptersOnly).trainable,
              count_params(make_bundle(bb, g, 1), TrainMode::kAdaptersOnly).trainable);
  }
}

TEST(ParamCount, MatchesClosedForm) {
  BackboneConfig bb{2, 64, 4, 128, 100, 32};
  const std::size_t d = 64, m = 16;
  auto base = make_bundle(bb, AdapterConfig{}, 1);
  EXPECT_EQ(count_params(base, TrainMode::kFinetuneAll).total, backbone_params(bb));

  auto adapt = make_bundle(bb, AdapterConfig{AdapterVariant::kAdapt, m}, 1);
  auto c = count_params(adapt, TrainMode::kAdaptersOnly);
  EXPECT_EQ(c.trainable, 4 * (2 * d * m + 2 * d));
  EXPECT_EQ(c.total, backbone_params(bb) + c.trainable);
  EXPECT_DOUBLE_EQ(c.fraction(), static_cast<double>(4 * (2 * d * m + 2 * d)) / static_cast<double>(c.total));

  AdapterConfig r{AdapterVariant::kStructRgcn, m};
  auto rgcn = make_bundle(bb, r, 1);
  EXPECT_EQ(count_params(rgcn, TrainMode::kAdaptersOnly).trainable,
            2 * adapter_layer_params(AdapterVariant::kStructRgcn, d, m, 2) +
                2 * adapter_layer_params(AdapterVariant::kAdapt, d, m));

  AdapterConfig basis{AdapterVariant::kStructRgcn, m, true, false, 5, 2};
  auto typed = make_bundle(bb, basis, 1, repr::RelationTable::typed({":a", ":b"}));
  EXPECT_EQ(count_params(typed, TrainMode::kAdaptersOnly).trainable,
            2 * adapter_layer_params(AdapterVariant::kStructRgcn, d, m, 5, 2));
  EXPECT_EQ(2 * adapter_layer_params(AdapterVariant::kStructRgcn, d, m, 5, 2), 2 * (5 * 2 + 2 * m * d + d * m + 2 * d));
}

TEST(ParamCount, NoAdaptersMeansNothingTrainable) {
  BackboneConfig bb{2, 16, 2, 32, 40, 24};
  auto c = count_params(make_bundle(bb, AdapterConfig{}, 1), TrainMode::kAdaptersOnly);
  EXPECT_EQ(c.trainable, 0u);
  EXPECT_EQ(c.fraction(), 0.0);
  auto f = count_params(make_bundle(bb, AdapterConfig{AdapterVariant::kAdapt, 4}, 1), TrainMode::kFinetuneAll);
  EXPECT_EQ(f.fraction(), 1.0);
}
