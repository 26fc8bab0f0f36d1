#include <vector>

#include <gtest/gtest.h>

#include "gdm/autodiff/rng.hpp"
#include "gdm/model/graph_prior.hpp"

using namespace gdm;
using namespace gdm::model;

namespace {

using Set = std::vector<std::size_t>;

ehr::DdiGraph complete_graph(std::size_t n) {
  ehr::DdiGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.add_edge(i, j);
  return g;
}

// Independent enumeration over ordered cross pairs.
double density_oracle(const Set& q, const Set& k, const ehr::DdiGraph& g) {
  if (q.empty() || k.empty()) return 0.0;
  double s = 0.0;
  for (auto a : q)
    for (auto b : k) s += g(a, b);
  return s / static_cast<double>(q.size() * k.size());
}

Set random_set(Rng& rng, std::size_t n) {
  Set s;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(0.35)) s.push_back(i);
  return s;
}

ehr::DdiGraph random_graph(Rng& rng, std::size_t n, double p) {
  ehr::DdiGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) g.add_edge(i, j);
  return g;
}

}  // namespace

TEST(VisitPairDensity, EmptyGraphIsZero) {
  ehr::DdiGraph g(5);
  EXPECT_EQ(visit_pair_ddi_density(Set{0, 1, 2}, Set{3, 4}, g), 0.0);
}

TEST(VisitPairDensity, HalfOfCrossPairsInteract) {
  // a = 0, b = 1, c = 2 with edge (a, c).
  ehr::DdiGraph g(3);
  g.add_edge(0, 2);
  EXPECT_DOUBLE_EQ(visit_pair_ddi_density(Set{0, 1}, Set{2}, g), 0.5);
}

TEST(VisitPairDensity, CompleteGraphIsOne) {
  EXPECT_DOUBLE_EQ(visit_pair_ddi_density(Set{0}, Set{1}, complete_graph(4)), 1.0);
}

TEST(VisitPairDensity, EmptySetIsZero) {
  auto g = complete_graph(3);
  EXPECT_EQ(visit_pair_ddi_density(Set{}, Set{1}, g), 0.0);
  EXPECT_EQ(visit_pair_ddi_density(Set{0}, Set{}, g), 0.0);
}

TEST(VisitPairDensity, RejectsOutOfVocabulary) {
  ehr::DdiGraph g(3);
  EXPECT_THROW(visit_pair_ddi_density(Set{0, 3}, Set{1}, g), ehr::DataError);
}

TEST(VisitPairDensity, SymmetricBoundedAndMatchesOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = random_graph(rng, 8, 0.3);
    auto q = random_set(rng, 8);
    auto k = random_set(rng, 8);
    const double d = visit_pair_ddi_density(q, k, g);
    EXPECT_DOUBLE_EQ(d, visit_pair_ddi_density(k, q, g));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_NEAR(d, density_oracle(q, k, g), 1e-15);
  }
}

TEST(VisitPairDensity, AddingAPartnerDoesNotDecrease) {
  // Fixed other set {0, 1}; medication 2 interacts with both of them.
  ehr::DdiGraph g(5);
  g.add_edge(2, 0);
  g.add_edge(2, 1);
  g.add_edge(3, 0);
  const Set other{0, 1};
  const double before = visit_pair_ddi_density(Set{3, 4}, other, g);
  const double after = visit_pair_ddi_density(Set{2, 3, 4}, other, g);
  EXPECT_GE(after, before);
}

TEST(DdiPairCount, SmallSetsHaveNoPairs) {
  auto g = complete_graph(3);
  EXPECT_EQ(ddi_pair_count(Set{}, g), (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(ddi_pair_count(Set{1}, g), (std::pair<std::size_t, std::size_t>{0, 0}));
}

TEST(DdiPairCount, OneOfThreePairs) {
  ehr::DdiGraph g(3);
  g.add_edge(0, 1);
  EXPECT_EQ(ddi_pair_count(Set{0, 1, 2}, g), (std::pair<std::size_t, std::size_t>{1, 3}));
}

TEST(DdiPairCount, CompleteGraphOfFour) {
  EXPECT_EQ(ddi_pair_count(Set{0, 1, 2, 3}, complete_graph(4)), (std::pair<std::size_t, std::size_t>{6, 6}));
}

namespace {

std::vector<KvSlot> base_layout(std::size_t n_visits) {
  std::vector<KvSlot> layout;
  for (std::size_t s = 0; s < n_visits; ++s) {
    layout.push_back({s, Channel::kDiag});
    layout.push_back({s, Channel::kProc});
    layout.push_back({s, Channel::kMed});
  }
  return layout;
}

}  // namespace

TEST(AssembleInterBias, NoMedicationSlotsGivesZero) {
  auto g = complete_graph(4);
  std::vector<KvSlot> layout{{0, Channel::kDiag}, {0, Channel::kProc}, {1, Channel::kLab}};
  auto b = assemble_inter_bias(Set{0, 1}, {{2, 3}, {1, 2}}, layout, g);
  ASSERT_EQ(b.cols, 3u);
  for (double x : b.matrix) EXPECT_EQ(x, 0.0);
}

TEST(AssembleInterBias, DensitiesLandOnMedicationPositions) {
  // current {0, 1}; visit 0 meds {2} (edge 0-2: density 1/2), visit 1 meds {3} (none).
  ehr::DdiGraph g(4);
  g.add_edge(0, 2);
  auto b = assemble_inter_bias(Set{0, 1}, {{2}, {3}}, base_layout(2), g);
  std::vector<double> expect{0.0, 0.0, density_oracle({0, 1}, {2}, g), 0.0, 0.0, density_oracle({0, 1}, {3}, g)};
  ASSERT_EQ(b.matrix.size(), expect.size());
  for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_DOUBLE_EQ(b.matrix[j], expect[j]) << j;
  EXPECT_DOUBLE_EQ(b(0, 2), 0.5);
  EXPECT_EQ(b(0, 5), 0.0);
  EXPECT_TRUE(b.med_mask_q[0]);
  EXPECT_TRUE(b.med_mask_kv[2]);
  EXPECT_FALSE(b.med_mask_kv[3]);
}

TEST(AssembleInterBias, IdenticalHistoricalSetsGiveIdenticalEntries) {
  Rng rng(22);
  auto g = random_graph(rng, 6, 0.5);
  auto b = assemble_inter_bias(Set{0, 4}, {{1, 2, 5}, {1, 2, 5}}, base_layout(2), g);
  EXPECT_EQ(b(0, 2), b(0, 5));
}

TEST(AssembleInterBias, ZeroOutsideMedicationChannels) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(rng, 7, 0.6);
    std::vector<Set> hist{random_set(rng, 7), random_set(rng, 7), random_set(rng, 7)};
    auto layout = base_layout(3);
    layout.insert(layout.begin() + 3, KvSlot{0, Channel::kLab});
    auto b = assemble_inter_bias(random_set(rng, 7), hist, layout, g);
    for (std::size_t j = 0; j < layout.size(); ++j) {
      if (layout[j].channel != Channel::kMed) EXPECT_EQ(b.matrix[j], 0.0);
      EXPECT_GE(b.matrix[j], 0.0);
      EXPECT_LE(b.matrix[j], 1.0);
    }
  }
}

TEST(AssembleInterBias, NullTokenIsUnbiased) {
  auto g = complete_graph(3);
  std::vector<KvSlot> layout{{0, Channel::kNull}};
  auto b = assemble_inter_bias(Set{0, 1}, {}, layout, g);
  ASSERT_EQ(b.cols, 1u);
  EXPECT_EQ(b.matrix[0], 0.0);
}

TEST(AssembleInterBias, RejectsLayoutVisitMismatch) {
  auto g = complete_graph(3);
  EXPECT_THROW(assemble_inter_bias(Set{0}, {{1}}, base_layout(2), g), ehr::DataError);
}
