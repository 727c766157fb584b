#include <gtest/gtest.h>

#include "kforest/error.hpp"
#include "kforest/serialize.hpp"
#include "support.hpp"

using namespace kforest;
using testing_support::stack_forest;

namespace {

std::string triple(const std::string& s, std::string_view p, const std::string& o) {
  return "<" + s + "> <" + rdf::predicate_iri(p) + "> <" + o + "> .";
}

}  // namespace

TEST(Rdf, PercentEncodingInverts) {
  EXPECT_EQ(rdf::percent_encode("a b/é"), "a%20b%2F%C3%A9");
  EXPECT_EQ(rdf::percent_decode("a%20b%2F%C3%A9"), "a b/é");
  EXPECT_THROW(rdf::percent_decode("bad%2"), ParseError);
  EXPECT_THROW(rdf::percent_decode("bad%zz"), ParseError);
}

TEST(Rdf, LiteralEscaping) { EXPECT_EQ(rdf::escape_literal("a\"b\\c\nd"), "a\\\"b\\\\c\\nd"); }

TEST(NTriples, StackForestContainsPrerequisiteTriple) {
  auto nt = to_ntriples(stack_forest());
  EXPECT_EQ(nt.rfind("# kforest vocabulary v1 ", 0), 0u);
  auto dep = triple(rdf::topic_iri("linear-list"), rdf::kIsPrerequisiteOf, rdf::topic_iri("stack"));
  EXPECT_NE(nt.find(dep + "\n"), std::string::npos) << nt;
  EXPECT_NE(nt.find(triple(rdf::topic_iri("stack"), rdf::kHasFacet, rdf::facet_iri("stack", {"operation"}))),
            std::string::npos);
  EXPECT_NE(nt.find(triple(rdf::facet_iri("stack", {"operation", "pop"}), rdf::kSubFacetOf,
                           rdf::facet_iri("stack", {"operation"}))),
            std::string::npos);
}

TEST(NTriples, EmptyForestIsEmptyDocument) {
  EXPECT_EQ(to_ntriples(KnowledgeForest{}), "");
  EXPECT_EQ(from_ntriples(""), KnowledgeForest{});
}

TEST(NTriples, SortedAndByteStable) {
  auto nt = to_ntriples(stack_forest());
  EXPECT_EQ(nt, to_ntriples(stack_forest()));
  std::vector<std::string> lines;
  std::size_t start = nt.find('\n') + 1;
  while (start < nt.size()) {
    std::size_t end = nt.find('\n', start);
    lines.push_back(nt.substr(start, end - start));
    start = end + 1;
  }
  EXPECT_TRUE(std::is_sorted(lines.begin(), lines.end()));
  EXPECT_EQ(std::adjacent_find(lines.begin(), lines.end()), lines.end());
}

TEST(NTriples, RoundTripRandomForests) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    auto f = testing_support::random_forest(rng);
    auto nt = to_ntriples(f);
    auto back = from_ntriples(nt);
    EXPECT_EQ(back, f) << nt;
    EXPECT_EQ(to_ntriples(back), nt);
  }
}

TEST(NTriples, ParseErrorsCarryPosition) {
  std::string text = "<http://example.org/kf#a> <http://example.org/kf#label> \"x\" .\n<broken\n";
  try {
    from_ntriples(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GE(e.column(), 1u);
  }
}

TEST(NTriples, UnknownPredicateAndDanglingReference) {
  auto topic = rdf::topic_iri("a");
  std::string unknown = "<" + topic + "> <http://example.org/kf#colour> \"red\" .\n";
  try {
    from_ntriples(unknown);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownPredicate);
  }
  std::string dangling = "<" + topic + "> <" + rdf::predicate_iri(rdf::kLabel) + "> \"A\" .\n" +
                         triple(topic, rdf::kIsPrerequisiteOf, rdf::topic_iri("ghost")) + "\n";
  try {
    from_ntriples(dangling);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingReference);
  }
}

TEST(Json, RoundTripRandomForests) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    auto f = testing_support::random_forest(rng);
    EXPECT_EQ(from_json(to_json(f, "course")), f);
  }
}

TEST(Json, RejectsBadSchema) {
  try {
    from_json(R"({"topics": 3})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
  }
}

TEST(Dot, FacetTreeView) {
  auto dot = to_dot(stack_forest(), DotView::FacetTree, "stack");
  EXPECT_EQ(dot.rfind("digraph \"stack\" {\n", 0), 0u);
  EXPECT_NE(dot.find("\"stack\" -> \"stack/operation\";"), std::string::npos);
  EXPECT_NE(dot.find("\"stack/operation\" -> \"stack/operation/pop\";"), std::string::npos);
  EXPECT_NE(dot.find("\"stack\" -> \"stack/storage\";"), std::string::npos);
  EXPECT_THROW(to_dot(stack_forest(), DotView::FacetTree, "queue"), Error);
}

TEST(Dot, OverviewView) {
  auto dot = to_dot(stack_forest(), DotView::Overview);
  EXPECT_NE(dot.find("\"linear-list\" -> \"stack\";"), std::string::npos);
  EXPECT_NE(dot.find("\"data-structure\" -> \"stack\" [dir=none, style=dashed];"), std::string::npos);
  EXPECT_EQ(dot, to_dot(stack_forest(), DotView::Overview));
}

TEST(Dot, QuotesAreEscaped) {
  KnowledgeForest f;
  f.add_topic(Topic{"q", "say \"hi\"", std::nullopt});
  auto dot = to_dot(f, DotView::Overview);
  EXPECT_NE(dot.find("label=\"say \\\"hi\\\"\""), std::string::npos) << dot;
}
