#include <gtest/gtest.h>

#include "kforest/core.hpp"
#include "kforest/error.hpp"
#include "support.hpp"

using namespace kforest;
using testing_support::stack_forest;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::ConfigError;
}

KnowledgeForest chain(const std::vector<DependencyEdge>& edges) {
  KnowledgeForest f;
  for (const auto& [a, b] : edges) {
    if (!f.topics.count(a)) f.add_topic(Topic{a, a, std::nullopt});
    if (!f.topics.count(b)) f.add_topic(Topic{b, b, std::nullopt});
    f.dependencies[{a, b}] = 1.0;
  }
  return f;
}

}  // namespace

TEST(FacetTree, AddFacetBuildsStackRelations) {
  auto f = stack_forest();
  const auto& tree = f.mfts.at("stack").tree;
  auto edges = tree.edges();
  EXPECT_NE(std::find(edges.begin(), edges.end(), std::make_pair(std::string("stack"), std::string("operation"))),
            edges.end());
  EXPECT_NE(std::find(edges.begin(), edges.end(), std::make_pair(std::string("operation"), std::string("pop"))),
            edges.end());
  EXPECT_EQ(tree.children({"operation"}), (std::vector<std::string>{"pop", "push"}));
  EXPECT_EQ(tree.names(), (std::set<std::string>{"operation", "pop", "push", "storage"}));
}

TEST(FacetTree, AddFacetErrors) {
  FacetTree t = new_facet_tree(Topic::from_label("Stack"));
  t = add_facet(t, {}, "operation");
  EXPECT_EQ(code_of([&] { add_facet(t, {"missing"}, "x"); }), ErrorCode::UnknownParent);
  EXPECT_EQ(code_of([&] { add_facet(t, {}, "operation"); }), ErrorCode::DuplicateSibling);
  EXPECT_EQ(code_of([&] { add_facet(t, {}, ""); }), ErrorCode::EmptyAfterNormalization);
}

TEST(FacetTree, AddFacetLeavesInputUntouched) {
  FacetTree t = new_facet_tree(Topic::from_label("Stack"));
  FacetTree u = add_facet(t, {}, "operation");
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(u.size(), 1u);
}

TEST(Topic, FromLabelSlugifies) {
  EXPECT_EQ(Topic::from_label("Linear list").id, "linear-list");
  EXPECT_EQ(Topic::from_label("  B+ Tree (data) ").id, "b-tree-data");
}

TEST(Fragment, AssembleIsIdempotent) {
  auto f = stack_forest();
  auto& mft = f.mfts.at("stack");
  auto frag = mft.fragments.begin()->second;
  auto again = assemble_fragment(mft, {"operation"}, frag);
  EXPECT_EQ(again, mft);
  EXPECT_EQ(mft.assembly.size(), 1u);
  EXPECT_EQ(mft.assembly.begin()->first, (FacetPath{"operation"}));
}

TEST(Fragment, AssembleErrors) {
  auto f = stack_forest();
  auto& mft = f.mfts.at("stack");
  auto frag = KnowledgeFragment::make("stack", "text");
  EXPECT_EQ(code_of([&] { assemble_fragment(mft, {"missing"}, frag); }), ErrorCode::UnknownFacet);
  auto other = KnowledgeFragment::make("linear-list", "text");
  EXPECT_EQ(code_of([&] { assemble_fragment(mft, {"operation"}, other); }), ErrorCode::TopicMismatch);
}

TEST(Validate, StackForestIsClean) { EXPECT_TRUE(validate(stack_forest()).ok()); }

TEST(Validate, ReportsEveryBrokenInvariant) {
  auto f = stack_forest();
  f.mfts.at("stack").tree.insert_unchecked({"ghost", "child"});
  f.dependencies[{"stack", "stack"}] = 0.5;
  f.dependencies[{"stack", "linear-list"}] = 1.5;
  f.dependencies[{"nowhere", "stack"}] = 0.5;
  auto report = validate(f);
  EXPECT_TRUE(report.contains(ViolationCode::OrphanFacet));
  EXPECT_TRUE(report.contains(ViolationCode::SelfDependency));
  EXPECT_TRUE(report.contains(ViolationCode::ScoreOutOfRange));
  EXPECT_TRUE(report.contains(ViolationCode::UnknownDependencyTopic));
  EXPECT_TRUE(report.contains(ViolationCode::CycleDetected));
}

TEST(Validate, DetectsHypernymCycle) {
  KnowledgeForest f;
  f.add_topic(Topic{"a", "A", "b"});
  f.add_topic(Topic{"b", "B", "a"});
  EXPECT_TRUE(validate(f).contains(ViolationCode::HypernymCycle));
}

TEST(Validate, NeverThrowsOnRandomDamage) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto f = testing_support::random_forest(rng);
    if (!f.topics.empty() && rng.bernoulli(0.5)) f.mfts.erase(f.mfts.begin());
    if (rng.bernoulli(0.5)) f.dependencies[{"x", "y"}] = -1.0;
    EXPECT_NO_THROW(validate(f));
  }
}

TEST(LearningOrder, LinearListBeforeStack) {
  auto order = learning_order(stack_forest());
  auto pos = [&](const std::string& id) { return std::find(order.begin(), order.end(), id) - order.begin(); };
  EXPECT_LT(pos("linear-list"), pos("stack"));
  EXPECT_EQ(order.size(), 3u);
}

TEST(LearningOrder, TiesAreLexicographic) {
  KnowledgeForest f;
  for (const char* id : {"c", "a", "b"}) f.add_topic(Topic{id, id, std::nullopt});
  EXPECT_EQ(learning_order(f), (std::vector<TopicId>{"a", "b", "c"}));
}

TEST(LearningOrder, CycleCarriesWitness) {
  auto f = chain({{"a", "b"}, {"b", "a"}});
  try {
    learning_order(f);
    FAIL() << "expected CycleError";
  } catch (const CycleError& e) {
    EXPECT_EQ(e.code(), ErrorCode::CyclicDependencies);
    ASSERT_GE(e.witness().size(), 3u);
    EXPECT_EQ(e.witness().front(), e.witness().back());
  }
}

TEST(LearningOrder, RespectsEveryEdgeOnRandomDags) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    auto f = testing_support::random_forest(rng);
    auto order = learning_order(f);
    std::map<TopicId, std::size_t> pos;
    for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
    ASSERT_EQ(order.size(), f.topics.size());
    for (const auto& [edge, score] : f.dependencies) EXPECT_LT(pos[edge.first], pos[edge.second]);
  }
}

TEST(Prerequisites, Diamond) {
  auto f = chain({{"a", "b"}, {"a", "c"}, {"b", "d"}, {"c", "d"}});
  EXPECT_EQ(prerequisites(f, "d"), (std::set<TopicId>{"a", "b", "c"}));
  EXPECT_TRUE(prerequisites(f, "a").empty());
  EXPECT_EQ(code_of([&] { prerequisites(f, "zz"); }), ErrorCode::UnknownTopic);
}

TEST(FindCycle, EmptyOnDag) {
  EXPECT_TRUE(find_cycle({{"a", "b"}, {"b", "c"}}).empty());
  auto cyc = find_cycle({{"a", "b"}, {"b", "c"}, {"c", "a"}});
  ASSERT_EQ(cyc.size(), 4u);
  EXPECT_EQ(cyc.front(), cyc.back());
}

TEST(Paths, FormatAndParseInvert) {
  FacetPath p{"operation", "pop"};
  EXPECT_EQ(format_path(p), "operation/pop");
  EXPECT_EQ(parse_path("operation/pop"), p);
  EXPECT_TRUE(parse_path("").empty());
}
