#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "seqcoref/metrics.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace seqcoref;

namespace {

CorefAnnotation from(const std::vector<std::vector<std::pair<int, int>>>& c) { return CorefAnnotation::from_clusters(c); }

// m1 = (1,1), m2 = (3,3), m3 = (5,5)
const CorefAnnotation kGold3 = from({{{1, 1}, {3, 3}, {5, 5}}});
const CorefAnnotation kPred3 = from({{{1, 1}, {3, 3}}, {{5, 5}}});

}  // namespace

TEST(Metrics, HandComputedCase) {
  auto r = score_document(kGold3, kPred3);
  EXPECT_NEAR(r.muc.precision, 1.0, 1e-9);
  EXPECT_NEAR(r.muc.recall, 0.5, 1e-9);
  EXPECT_NEAR(r.muc.f1, 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.b3.precision, 1.0, 1e-9);
  EXPECT_NEAR(r.b3.recall, 5.0 / 9.0, 1e-9);
  EXPECT_NEAR(r.b3.f1, 5.0 / 7.0, 1e-9);
  EXPECT_NEAR(r.ceafe.precision, 0.4, 1e-9);
  EXPECT_NEAR(r.ceafe.recall, 0.8, 1e-9);
  EXPECT_NEAR(r.ceafe.f1, 8.0 / 15.0, 1e-9);
  EXPECT_NEAR(r.conll_avg, (2.0 / 3.0 + 5.0 / 7.0 + 8.0 / 15.0) / 3.0, 1e-12);
}

TEST(Metrics, PerfectPrediction) {
  std::mt19937 rng(1);
  for (int i = 0; i < 50; ++i) {
    auto a = support::random_clustering(rng, 30, 15, 5);
    if (a.empty()) continue;
    auto r = score_document(a, a);
    EXPECT_DOUBLE_EQ(r.b3.f1, 1.0);
    EXPECT_DOUBLE_EQ(r.ceafe.f1, 1.0);
    EXPECT_DOUBLE_EQ(r.mentions.f1, 1.0);
  }
}

TEST(Metrics, EmptyPrediction) {
  auto r = score_document(kGold3, CorefAnnotation());
  EXPECT_EQ(r.muc.recall, 0.0);
  EXPECT_EQ(r.b3.recall, 0.0);
  EXPECT_EQ(r.ceafe.recall, 0.0);
  EXPECT_EQ(r.muc.precision, 0.0);
  EXPECT_FALSE(r.flags.empty());
}

TEST(Metrics, MentionDetection) {
  auto p = mention_detection_f1(CorefAnnotation({{2, 2, 1}, {2, 3, 1}, {5, 5, 2}}), CorefAnnotation({{2, 3, 1}, {5, 5, 1}}));
  EXPECT_NEAR(p.precision, 1.0, 1e-12);
  EXPECT_NEAR(p.recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.f1, 0.8, 1e-12);
  auto labels = mention_detection_f1(kGold3, kPred3);
  EXPECT_DOUBLE_EQ(labels.f1, 1.0);
  EXPECT_EQ(mention_detection_f1(kGold3, CorefAnnotation()).recall, 0.0);
}

TEST(Metrics, MissingDocumentsAreListed) {
  std::map<std::string, CorefAnnotation> g{{"a", kGold3}, {"b", kGold3}}, p{{"a", kPred3}, {"c", kPred3}};
  try {
    score(g, p);
    FAIL();
  } catch (const MissingDocuments& e) {
    EXPECT_EQ(e.keys(), (std::vector<std::string>{"b", "c"}));
  }
}

TEST(Metrics, SingletonProfile) {
  auto gold = from({{{1, 1}, {3, 3}}, {{7, 7}}});
  auto pred = from({{{1, 1}, {3, 3}}, {{9, 9}}});
  EXPECT_LT(score_document(gold, pred).b3.f1, 1.0);
  ScoreOptions onto;
  onto.singletons = SingletonProfile::Drop;
  EXPECT_DOUBLE_EQ(score_document(gold, pred, onto).b3.f1, 1.0);
  EXPECT_EQ(parse_profile("ontonotes"), SingletonProfile::Drop);
  EXPECT_EQ(parse_profile("preco"), SingletonProfile::Keep);
  EXPECT_THROW(parse_profile("x"), std::invalid_argument);
}

TEST(Metrics, RestrictedClustering) {
  EXPECT_DOUBLE_EQ(restricted_clustering_score(kGold3, kGold3).conll_avg, 1.0);
  auto spurious = from({{{1, 1}, {3, 3}, {5, 5}}, {{9, 9}}});
  EXPECT_DOUBLE_EQ(restricted_clustering_score(kGold3, spurious).conll_avg, 1.0);
  auto none = restricted_clustering_score(kGold3, from({{{8, 8}}}));
  EXPECT_EQ(none.conll_avg, 0.0);
  EXPECT_NE(std::find(none.flags.begin(), none.flags.end(), "restricted:empty-intersection"), none.flags.end());
}

TEST(Metrics, RestrictionChangesCeafMatching) {
  // Gold {m1,m2},{m3,m4}; pred {m1,m3,m5},{m2},{m4,m6}. Restriction drops
  // m5, m6 and the CEAF assignment changes.
  auto gold = from({{{1, 1}, {2, 2}}, {{3, 3}, {4, 4}}});
  auto pred = from({{{1, 1}, {3, 3}, {5, 5}}, {{2, 2}}, {{4, 4}, {6, 6}}});
  auto [rg, rp] = restrict_to_common(gold, pred);
  auto g = scoring_clusters(rg), p = scoring_clusters(rp);
  std::vector<std::vector<double>> w(g.size(), std::vector<double>(p.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) w[i][j] = phi4(g[i], p[j]);
  }
  const double best = support::brute_force_assignment(w);
  auto r = restricted_clustering_score(gold, pred);
  EXPECT_NEAR(r.ceafe.recall, best / static_cast<double>(g.size()), 1e-12);
  EXPECT_NEAR(r.ceafe.precision, best / static_cast<double>(p.size()), 1e-12);
  EXPECT_NE(r.ceafe.f1, score_document(gold, pred).ceafe.f1);
}

TEST(Matching, TwoByTwo) {
  auto m = max_weight_matching({{0.8, 0.2}, {0.3, 0.9}});
  EXPECT_EQ(m.pairs, (std::vector<std::pair<int, int>>{{0, 0}, {1, 1}}));
  EXPECT_NEAR(m.total, 1.7, 1e-12);
}

TEST(Matching, IdentityOnIdenticalClusters) {
  std::vector<Cluster> c{{{1, 1}, {2, 2}}, {{4, 4}}, {{5, 6}, {8, 8}}};
  auto m = optimal_cluster_matching<Cluster, Cluster>(c, c, phi4);
  EXPECT_EQ(m.pairs, (std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_NEAR(m.total, 3.0, 1e-12);
}

TEST(Matching, BruteForceRectangular) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 300; ++it) {
    const int r = support::uniform(rng, 0, 6), c = support::uniform(rng, 0, 6);
    std::vector<std::vector<double>> w(r, std::vector<double>(c));
    for (auto& row : w) {
      for (auto& v : row) v = support::coin(rng, 0.3) ? 0.0 : u(rng);
    }
    auto m = max_weight_matching(w);
    EXPECT_NEAR(m.total, support::brute_force_assignment(w), 1e-9);
    std::set<int> rows, cols;
    for (auto [i, j] : m.pairs) {
      EXPECT_TRUE(rows.insert(i).second);
      EXPECT_TRUE(cols.insert(j).second);
    }
  }
}

TEST(Metrics, PermutationInvarianceAndSymmetry) {
  std::mt19937 rng(23);
  for (int it = 0; it < 300; ++it) {
    auto g = support::random_clustering(rng, 25, 12, 5);
    auto p = support::random_clustering(rng, 25, 12, 5);
    auto a = score_document(g, p);
    // Relabel by a random permutation.
    std::vector<int> perm(static_cast<std::size_t>(p.num_clusters()));
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Span> spans;
    for (auto s : p.spans()) spans.push_back({s.start, s.end, perm[static_cast<std::size_t>(s.cluster - 1)]});
    std::shuffle(spans.begin(), spans.end(), rng);
    auto b = score_document(g, CorefAnnotation(spans));
    EXPECT_NEAR(a.muc.f1, b.muc.f1, 1e-12);
    EXPECT_NEAR(a.b3.f1, b.b3.f1, 1e-12);
    EXPECT_NEAR(a.ceafe.f1, b.ceafe.f1, 1e-12);
    auto swapped = score_document(p, g);
    for (auto [x, y] : {std::pair{a.muc, swapped.muc}, std::pair{a.b3, swapped.b3}, std::pair{a.ceafe, swapped.ceafe}}) {
      EXPECT_NEAR(x.precision, y.recall, 1e-12);
      EXPECT_NEAR(x.recall, y.precision, 1e-12);
    }
    for (double v : {a.muc.precision, a.muc.recall, a.b3.precision, a.b3.recall, a.ceafe.precision, a.ceafe.recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_NEAR(a.conll_avg, (a.muc.f1 + a.b3.f1 + a.ceafe.f1) / 3.0, 1e-12);
  }
}

TEST(Metrics, CorpusAggregationSumsCounts) {
  std::mt19937 rng(29);
  std::map<std::string, CorefAnnotation> g, p;
  CorpusCounts total;
  for (int d = 0; d < 20; ++d) {
    const std::string key = "d" + std::to_string(d);
    g[key] = support::random_clustering(rng, 20, 10, 4);
    p[key] = support::random_clustering(rng, 20, 10, 4);
    total += document_counts(g[key], p[key]);
  }
  auto corpus = score(g, p);
  auto direct = report_from(total);
  EXPECT_DOUBLE_EQ(corpus.muc.f1, direct.muc.f1);
  EXPECT_DOUBLE_EQ(corpus.b3.f1, direct.b3.f1);
  EXPECT_DOUBLE_EQ(corpus.ceafe.f1, direct.ceafe.f1);
  EXPECT_NEAR(corpus.b3.recall, total.b3.r_num / total.b3.r_den, 1e-12);
  EXPECT_EQ(corpus.documents, 20);
}

TEST(Metrics, TableAndJson) {
  auto r = score_document(kGold3, kPred3);
  std::ostringstream os;
  write_table(os, r);
  const auto text = os.str();
  EXPECT_LT(text.find("MUC"), text.find("B3"));
  EXPECT_LT(text.find("B3"), text.find("CEAFe"));
  EXPECT_LT(text.find("CEAFe"), text.find("Avg"));
  auto j = to_json(r);
  EXPECT_NEAR(j["ceafe"]["f1"].get<double>(), 8.0 / 15.0, 1e-12);
}
