#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "gdm/autodiff/ops.hpp"
#include "gdm/model/embedding.hpp"
#include "test_util.hpp"

using namespace gdm;
using namespace gdm::model;
using gdm::testing::random_tensor;

TEST(EmbedCodesPooled, EmptySetIsZero) {
  Rng rng(1);
  auto table = random_tensor(rng, {5, 4});
  auto out = embed_codes_pooled({}, table);
  ASSERT_EQ(out.shape(), (ad::Shape{1, 4}));
  for (double x : out.data()) EXPECT_EQ(x, 0.0);
}

TEST(EmbedCodesPooled, SingletonIsRow) {
  Rng rng(2);
  auto table = random_tensor(rng, {5, 4});
  std::vector<std::size_t> codes{3};
  auto out = embed_codes_pooled(codes, table);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.data()[j], table.at(3, j));
}

TEST(EmbedCodesPooled, PairIsElementwiseSum) {
  Rng rng(3);
  auto table = random_tensor(rng, {5, 4});
  std::vector<std::size_t> codes{1, 4};
  auto out = embed_codes_pooled(codes, table);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out.data()[j], table.at(1, j) + table.at(4, j));
}

TEST(EmbedCodesPooled, PermutationInvariant) {
  Rng rng(4);
  auto table = random_tensor(rng, {9, 6});
  std::vector<std::size_t> a{0, 2, 5, 7};
  std::vector<std::size_t> b{7, 5, 0, 2};
  auto x = embed_codes_pooled(a, table);
  auto y = embed_codes_pooled(b, table);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(x.data()[j], y.data()[j], 1e-15);
}

TEST(EmbedCodesPooled, RejectsOutOfVocabulary) {
  Rng rng(5);
  auto table = random_tensor(rng, {3, 2});
  std::vector<std::size_t> codes{0, 3};
  EXPECT_THROW(embed_codes_pooled(codes, table), ad::TensorError);
}

TEST(EncodeLabs, NoEventsIsZero) {
  Rng rng(6);
  auto w = random_tensor(rng, {2, 4});
  auto out = encode_labs({}, w);
  for (double x : out.data()) EXPECT_EQ(x, 0.0);
}

TEST(EncodeLabs, ZeroMapIsZero) {
  std::vector<ehr::NormalizedLab> labs{{0.25, 0.7}, {0.5, 0.1}};
  auto out = encode_labs(labs, ad::Tensor::zeros({2, 4}));
  for (double x : out.data()) EXPECT_EQ(x, 0.0);
}

TEST(EncodeLabs, SingleEventMatchesDirectEvaluation) {
  Rng rng(7);
  auto w = random_tensor(rng, {2, 5});
  std::vector<ehr::NormalizedLab> labs{{0.375, 0.62}};
  auto out = encode_labs(labs, w);
  for (std::size_t j = 0; j < 5; ++j) {
    const double pre = 0.375 * w.at(0, j) + 0.62 * w.at(1, j);
    EXPECT_NEAR(out.data()[j], std::max(0.0, pre), 1e-15);
  }
}

TEST(EncodeLabs, MeanOverEvents) {
  Rng rng(8);
  auto w = random_tensor(rng, {2, 3});
  std::vector<ehr::NormalizedLab> labs{{0.1, 0.9}, {0.6, 0.2}, {0.8, 0.4}};
  auto out = encode_labs(labs, w);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (const auto& e : labs) s += std::max(0.0, e.id * w.at(0, j) + e.value * w.at(1, j));
    EXPECT_NEAR(out.data()[j], s / 3.0, 1e-15);
  }
}

TEST(EncodeLabs, RejectsNonFiniteValue) {
  std::vector<ehr::NormalizedLab> labs{{0.1, std::numeric_limits<double>::quiet_NaN()}};
  EXPECT_THROW(encode_labs(labs, ad::Tensor::full({2, 3}, 0.1)), ad::TensorError);
}

TEST(EncodeDemographics, AgeZeroGivesZeroVector) {
  Rng rng(9);
  auto g = random_tensor(rng, {2, 4});
  auto a = random_tensor(rng, {1, 4});
  auto out = encode_demographics(1, 0.0, g, a);
  for (double x : out.age.data()) EXPECT_EQ(x, 0.0);
}

TEST(EncodeDemographics, GenderSelectsDistinctRows) {
  Rng rng(10);
  auto g = random_tensor(rng, {2, 4});
  auto a = random_tensor(rng, {1, 4});
  auto f = encode_demographics(0, 30.0, g, a);
  auto m = encode_demographics(1, 30.0, g, a);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(f.gender.data()[j], g.at(0, j));
    EXPECT_EQ(m.gender.data()[j], g.at(1, j));
  }
}

TEST(EncodeDemographics, AgeFiftyHalvesProjection) {
  Rng rng(11);
  auto g = random_tensor(rng, {2, 4});
  auto a = random_tensor(rng, {1, 4});
  auto out = encode_demographics(0, 50.0, g, a);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out.age.data()[j], 0.5 * a.data()[j]);
}

TEST(EncodeDemographics, RejectsInvalidGender) {
  auto g = ad::Tensor::zeros({2, 2});
  auto a = ad::Tensor::zeros({1, 2});
  EXPECT_THROW(encode_demographics(2, 10.0, g, a), ad::TensorError);
  EXPECT_THROW(encode_demographics(-1, 10.0, g, a), ad::TensorError);
}

TEST(HomographRefine, ZeroAdjacencyReturnsInput) {
  Rng rng(12);
  auto table = random_tensor(rng, {4, 3});
  auto map = random_tensor(rng, {3, 3});
  HomoGraph graph(4, std::vector<double>(16, 0.0));
  std::vector<std::size_t> codes{0, 2};
  auto pooled = embed_codes_pooled(codes, table);
  auto out = homograph_refine(pooled, codes, graph, table, map);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.data()[j], pooled.data()[j]);
}

TEST(HomographRefine, ZeroMapReturnsInputBitExactly) {
  Rng rng(13);
  auto table = random_tensor(rng, {3, 4});
  std::vector<double> adj(9, 0.0);
  adj[0 * 3 + 1] = adj[1 * 3 + 0] = 1.0;
  HomoGraph graph(3, adj);
  std::vector<std::size_t> codes{0};
  auto pooled = embed_codes_pooled(codes, table);
  auto out = homograph_refine(pooled, codes, graph, table, ad::Tensor::zeros({4, 4}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.data()[j], pooled.data()[j]);
}

TEST(HomographRefine, TwoCodesMatchBruteForce) {
  Rng rng(14);
  const std::size_t n = 5, d = 4;
  auto table = random_tensor(rng, {n, d});
  auto map = random_tensor(rng, {d, d});
  // 0 -- 3 and 1 -- 4, each code in the set has exactly one neighbour.
  std::vector<double> adj(n * n, 0.0);
  adj[0 * n + 3] = adj[3 * n + 0] = 1.0;
  adj[1 * n + 4] = adj[4 * n + 1] = 1.0;
  HomoGraph graph(n, adj);
  std::vector<std::size_t> codes{0, 1};
  auto pooled = embed_codes_pooled(codes, table);
  auto out = homograph_refine(pooled, codes, graph, table, map);

  std::vector<double> msg(d);
  for (std::size_t j = 0; j < d; ++j) msg[j] = 0.5 * (table.at(3, j) + table.at(4, j));
  for (std::size_t j = 0; j < d; ++j) {
    double pre = 0.0;
    for (std::size_t i = 0; i < d; ++i) pre += msg[i] * map.at(i, j);
    const double expect = table.at(0, j) + table.at(1, j) + std::max(0.0, pre);
    EXPECT_NEAR(out.data()[j], expect, 1e-14);
  }
}

TEST(HomographRefine, MeanOverNeighboursPerCode) {
  // Code 0 has neighbours {1, 2}; code 3 is isolated and contributes zero.
  const std::size_t n = 4;
  std::vector<double> adj(n * n, 0.0);
  adj[0 * n + 1] = adj[1 * n + 0] = 1.0;
  adj[0 * n + 2] = adj[2 * n + 0] = 1.0;
  HomoGraph graph(n, adj);
  std::vector<std::size_t> codes{0, 3};
  auto w = graph.message_weights(codes);
  EXPECT_DOUBLE_EQ(w[0], 0.0);
  EXPECT_DOUBLE_EQ(w[1], 0.25);
  EXPECT_DOUBLE_EQ(w[2], 0.25);
  EXPECT_DOUBLE_EQ(w[3], 0.0);
}

TEST(HomographRefine, RejectsAdjacencyShapeMismatch) {
  EXPECT_THROW(HomoGraph(3, std::vector<double>(8, 0.0)), ad::TensorError);
  Rng rng(15);
  auto table = random_tensor(rng, {4, 2});
  HomoGraph graph(3, std::vector<double>(9, 0.0));
  std::vector<std::size_t> codes{0};
  EXPECT_THROW(homograph_refine(embed_codes_pooled(codes, table), codes, graph, table, ad::Tensor::zeros({2, 2})),
               ad::TensorError);
}

TEST(HomoGraph, CosupportLinksCodesSharingAMedication) {
  ehr::EffectMatrix m(3, 2);
  m(0, 0) = 0.4;
  m(1, 0) = 0.1;
  m(2, 1) = 0.9;
  auto g = HomoGraph::from_cosupport(m);
  EXPECT_EQ(g.neighbors(0), (std::vector<std::size_t>{1}));
  EXPECT_EQ(g.neighbors(1), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(g.neighbors(2).empty());
}

TEST(HomoGraph, FromDdiMirrorsEdges) {
  ehr::DdiGraph ddi(4);
  ddi.add_edge(0, 2);
  ddi.add_edge(2, 3);
  auto g = HomoGraph::from_ddi(ddi);
  EXPECT_EQ(g.neighbors(2), (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(g.neighbors(1).empty());
}

TEST(HomographRefine, GradientFlowsToTableAndMap) {
  Rng rng(16);
  // Positive table and map keep every ReLU unit active.
  auto table = random_tensor(rng, {4, 3}, 0.1, 1.0, true);
  auto map = random_tensor(rng, {3, 3}, 0.1, 1.0, true);
  std::vector<double> adj(16, 1.0);
  HomoGraph graph(4, adj);
  std::vector<std::size_t> codes{1};
  auto out = homograph_refine(embed_codes_pooled(codes, table), codes, graph, table, map);
  ad::backward(ad::sum(out));
  ASSERT_TRUE(table.has_grad());
  ASSERT_TRUE(map.has_grad());
  double total = 0.0;
  for (double g : map.grad()) total += std::abs(g);
  EXPECT_GT(total, 0.0);
}
