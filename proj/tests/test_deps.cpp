#include <cmath>

#include <gtest/gtest.h>

#include "kforest/deps.hpp"
#include "kforest/error.hpp"
#include "kforest/metrics.hpp"
#include "kforest/text.hpp"
#include "oracle_values.hpp"

using namespace kforest;

namespace {

std::map<TopicId, Topic> siblings() {
  return {{"root", {"root", "Root", std::nullopt}}, {"a", {"a", "A", "root"}}, {"b", {"b", "B", "root"}}};
}

LabeledPair labeled(std::array<double, 5> v, int label) {
  LabeledPair p;
  p.features.values = v;
  p.label = label;
  return p;
}

}  // namespace

TEST(Corpus, TfidfOfExclusiveTerm) {
  Corpus corpus({{"a", "stack stack stack stack stack queue"}, {"b", "queue list"}});
  auto terms = core_terms(corpus, "a", 1);
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0].first, "stack");
  EXPECT_NEAR(terms[0].second, oracle::kStackTfidf, 1e-12);
  EXPECT_EQ(corpus.document_frequency("queue"), 2);
  EXPECT_DOUBLE_EQ(corpus.idf("queue"), 0.0);
}

TEST(Corpus, CoreTermTiesAreLexicographic) {
  Corpus corpus({{"a", "zeta alpha mu"}, {"b", "other"}});
  auto terms = core_terms(corpus, "a", 3);
  ASSERT_EQ(terms.size(), 3u);
  EXPECT_EQ(terms[0].first, "alpha");
  EXPECT_EQ(terms[1].first, "mu");
  EXPECT_EQ(terms[2].first, "zeta");
}

TEST(Corpus, EmptyDocumentThrows) {
  Corpus corpus({{"a", "the of and"}, {"b", "word"}});
  try {
    core_terms(corpus, "a", 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDocument);
  }
}

TEST(Hierarchy, SiblingDistanceAndLocality) {
  auto topics = siblings();
  EXPECT_EQ(hierarchy_distance(topics, "a", "b"), oracle::kSiblingDistance);
  EXPECT_EQ(hierarchy_distance(topics, "a", "a"), 0);
  EXPECT_EQ(hierarchy_distance(topics, "root", "b"), 1);
  topics.emplace("lone", Topic{"lone", "Lone", std::nullopt});
  EXPECT_FALSE(hierarchy_distance(topics, "a", "lone").has_value());

  Corpus corpus({{"a", "alpha beta"}, {"b", "beta gamma"}, {"root", "root"}});
  auto f = pair_features("a", "b", corpus, siblings());
  EXPECT_NEAR(f.locality(), oracle::kSiblingLocality, 1e-15);
  EXPECT_NEAR(f.jaccard(), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.asymmetry(), f.coverage_ab() - f.coverage_ba());
}

TEST(Features, AsymmetricCoverage) {
  // b mentions every core term of a; a mentions none of b's.
  Corpus corpus({{"a", "list node"}, {"b", "stack push list node"}, {"root", "root"}});
  auto f = pair_features("a", "b", corpus, siblings(), 10);
  EXPECT_DOUBLE_EQ(f.coverage_ab(), 1.0);
  EXPECT_LT(f.coverage_ba(), 1.0);
  EXPECT_GT(f.asymmetry(), 0.0);
  auto r = pair_features("b", "a", corpus, siblings(), 10);
  EXPECT_DOUBLE_EQ(r.asymmetry(), -f.asymmetry());
}

TEST(Model, SeparableToySetIsLearned) {
  std::vector<LabeledPair> pairs;
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    double a = rng.uniform(0.5, 1.0), b = rng.uniform(0.0, 0.3);
    double loc = rng.uniform(0.2, 1.0), jac = rng.uniform(0.0, 0.5);
    pairs.push_back(labeled({a, b, a - b, loc, jac}, 1));
    pairs.push_back(labeled({b, a, b - a, loc, jac}, 0));
  }
  auto model = train_dependency_model(pairs);
  ASSERT_TRUE(model.trained);
  int correct = 0;
  for (const auto& p : pairs) correct += (model.score(p.features) > 0.5) == (p.label == 1);
  EXPECT_EQ(correct, static_cast<int>(pairs.size()));
  ASSERT_GE(model.loss_trace.size(), 2u);
  for (std::size_t i = 1; i < model.loss_trace.size(); ++i) {
    EXPECT_LE(model.loss_trace[i], model.loss_trace[i - 1] + 1e-12);
  }
}

TEST(Model, DegenerateAndUntrained) {
  std::vector<LabeledPair> pairs = {labeled({1, 0, 1, 1, 0}, 1), labeled({1, 0, 1, 0.5, 0}, 1)};
  try {
    train_dependency_model(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
  }
  DependencyModel m;
  EXPECT_THROW(m.score(PairFeatures{}), Error);
}

TEST(BreakCycles, DropsWeakestEdge) {
  std::map<DependencyEdge, double> edges = {{{"a", "b"}, 0.9}, {{"b", "c"}, 0.6}, {{"c", "a"}, 0.7}, {{"c", "d"}, 0.8}};
  auto out = break_cycles(edges);
  EXPECT_EQ(out.size(), 3u);
  EXPECT_FALSE(out.count({"b", "c"}));
  EXPECT_TRUE(out.count({"c", "d"}));
}

TEST(BreakCycles, TwoCycleTieIsLexicographic) {
  auto out = break_cycles({{{"a", "b"}, 0.6}, {{"b", "a"}, 0.6}});
  EXPECT_EQ(out, (std::map<DependencyEdge, double>{{{"b", "a"}, 0.6}}));
}

TEST(BreakCycles, RandomGraphsBecomeAcyclic) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    std::map<DependencyEdge, double> edges;
    std::size_t n = 2 + rng.below(8);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b && rng.bernoulli(0.3)) edges[{std::to_string(a), std::to_string(b)}] = rng.uniform();
      }
    }
    auto out = break_cycles(edges);
    std::set<DependencyEdge> keys;
    for (const auto& [e, s] : out) {
      keys.insert(e);
      EXPECT_EQ(edges.at(e), s);
    }
    EXPECT_TRUE(find_cycle(keys).empty());
  }
}

TEST(Predict, SyntheticCourseIsAcyclicAntisymmetricAndAccurate) {
  SyntheticCourseSpec spec;
  spec.topics = 40;
  spec.seed = 11;
  auto course = synth_course(spec);
  auto gold = forest_from_dataset(course.dataset);
  Corpus corpus(topic_documents(gold));
  std::vector<DependencyEdge> positives(course.truth.planted.begin(), course.truth.planted.end());
  auto model = train_dependency_model(training_pairs(positives, {}, gold.topics, corpus, 5));
  auto predicted = predict_dependencies(model, gold.topics, corpus);

  std::set<DependencyEdge> keys;
  for (const auto& [e, s] : predicted) {
    keys.insert(e);
    EXPECT_FALSE(predicted.count({e.second, e.first}));
    EXPECT_GT(s, 0.5);
    EXPECT_LE(s, 1.0);
    EXPECT_LE(*hierarchy_distance(gold.topics, e.first, e.second), 4);
  }
  EXPECT_TRUE(find_cycle(keys).empty());
  EXPECT_GE(prf(keys, course.truth.planted).f1, 0.8);
}

TEST(TrainingPairs, ReversesArePositivesNegated) {
  auto topics = siblings();
  Corpus corpus({{"a", "list node"}, {"b", "stack push list node"}, {"root", "root tree"}});
  auto pairs = training_pairs({{"a", "b"}}, {}, topics, corpus, 1);
  int pos = 0, neg = 0;
  for (const auto& p : pairs) (p.label ? pos : neg)++;
  EXPECT_EQ(pos, 1);
  EXPECT_GE(neg, 1);
  auto again = training_pairs({{"a", "b"}}, {}, topics, corpus, 1);
  ASSERT_EQ(again.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(again[i].features.values, pairs[i].features.values);
    EXPECT_EQ(again[i].label, pairs[i].label);
  }
}
