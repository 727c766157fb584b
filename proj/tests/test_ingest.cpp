#include <fstream>

#include <gtest/gtest.h>

#include "kforest/error.hpp"
#include "kforest/ingest.hpp"
#include "support.hpp"

using namespace kforest;
using testing_support::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

template <typename Fn>
ErrorCode code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(Outline, WikiHeadings) {
  auto doc = parse_outline("== Operation ==\n=== Push ===\n");
  EXPECT_EQ(doc.entries, (std::vector<OutlineEntry>{{"operation", 1}, {"push", 2}}));
}

TEST(Outline, WikiBodyTextIgnored) {
  auto doc = parse_outline("intro text\n== Storage ==\nsome body\n== Operation ==\n");
  EXPECT_EQ(doc.entries, (std::vector<OutlineEntry>{{"storage", 1}, {"operation", 1}}));
}

TEST(Outline, StopSectionsDropped) {
  EXPECT_TRUE(parse_outline("== References ==\n").entries.empty());
  auto doc = parse_outline("== See also ==\n=== Queue ===\n== Operation ==\n");
  EXPECT_EQ(doc.entries, (std::vector<OutlineEntry>{{"operation", 1}}));
}

TEST(Outline, DepthJumpIsMalformed) {
  EXPECT_EQ(code_of([] { parse_outline("=== Deep ===\n"); }), ErrorCode::MalformedOutline);
  EXPECT_EQ(code_of([] { parse_outline("a\n\t\t\tb\n"); }), ErrorCode::MalformedOutline);
}

TEST(Outline, IndentedForm) {
  auto doc = parse_outline("Operation\n\tPush\n\tPop\nStorage\n");
  EXPECT_EQ(doc.entries, (std::vector<OutlineEntry>{{"operation", 1}, {"push", 2}, {"pop", 2}, {"storage", 1}}));
}

TEST(Outline, RenderParseRoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    OutlineDocument doc;
    int depth = 0;
    std::size_t n = rng.below(10);
    for (std::size_t k = 0; k < n; ++k) {
      depth = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(depth) + 1));
      std::string name = testing_support::random_name(rng);
      if (is_stop_section(name)) continue;
      doc.entries.push_back({name, depth});
    }
    EXPECT_EQ(parse_outline(render_outline(doc)), doc);
  }
}

TEST(Normalize, StatedRules) {
  EXPECT_EQ(normalize_facet_name("Push (computing)"), "push");
  EXPECT_EQ(normalize_facet_name("3.1 Storage"), "storage");
  EXPECT_EQ(normalize_facet_name("  Time  complexity!! "), "time-complexity");
  EXPECT_EQ(code_of([] { normalize_facet_name("---"); }), ErrorCode::EmptyAfterNormalization);
}

TEST(Normalize, Idempotent) {
  Rng rng(9);
  const std::string chars = "aB3 .-(x)_!9Zé";
  for (int i = 0; i < 1000; ++i) {
    std::string raw;
    std::size_t n = 1 + rng.below(16);
    for (std::size_t k = 0; k < n; ++k) raw.push_back(chars[rng.below(chars.size())]);
    std::string once;
    try {
      once = normalize_facet_name(raw);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyAfterNormalization);
      continue;
    }
    EXPECT_EQ(normalize_facet_name(once), once) << raw;
  }
}

TEST(InitialFacets, StackFragment) {
  OutlineDocument doc{"stack", {{"operation", 1}, {"push", 2}, {"pop", 2}}};
  FacetTree t = initial_facets(doc);
  EXPECT_EQ(t.topic(), "stack");
  EXPECT_EQ(t.children({}), (std::vector<std::string>{"operation"}));
  EXPECT_EQ(t.children({"operation"}), (std::vector<std::string>{"pop", "push"}));
}

TEST(InitialFacets, EmptyAndDuplicates) {
  EXPECT_TRUE(initial_facets(OutlineDocument{"t", {}}).empty());
  EXPECT_EQ(initial_facets(OutlineDocument{"t", {{"a", 1}, {"a", 1}}}).size(), 1u);
}

TEST(Course, ParseAndStats) {
  const char* text = R"({
    "name": "mini",
    "topics": [{"id": "linear-list", "label": "Linear list"}, {"id": "stack", "label": "Stack"}],
    "fragments": [{"topic": "stack", "text": "A push operation adds an item.", "facets": ["operation"]}],
    "facet_trees": {"stack": [{"path": ["operation"]}, {"path": "operation/push"}]},
    "dependencies": [["linear-list", "stack"]]
  })";
  CourseDataset ds = parse_course(text);
  check_integrity(ds);
  EXPECT_EQ(stats(ds), (CourseStats{2, 1, 1}));
  EXPECT_TRUE(ds.facet_trees.at("stack").contains({"operation", "push"}));
}

TEST(Course, EmptyFile) { EXPECT_EQ(stats(parse_course("")), (CourseStats{0, 0, 0})); }

TEST(Course, SchemaErrorsCarryLocation) {
  try {
    parse_course(R"({"topics": [{"label": "x"}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_NE(std::string(e.what()).find("/topics/0"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { parse_course("[1,2]"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_course("{"); }), ErrorCode::SchemaError);
}

TEST(Course, IntegrityErrors) {
  EXPECT_EQ(code_of([] { parse_course(R"({"topics": [{"id": "a"}], "dependencies": [["a", "b"]]})"); }),
            ErrorCode::IntegrityError);
  CourseDataset ds;
  ds.topics.push_back(Topic{"a", "A", std::nullopt});
  ds.fragments.push_back({"ghost", "text", {}});
  EXPECT_EQ(code_of([&] { check_integrity(ds); }), ErrorCode::IntegrityError);
}

TEST(Course, JsonRoundTrip) {
  auto ds = testing_support::fixture_course("rt", 7, 30, 9);
  auto back = parse_course(course_to_json(ds));
  EXPECT_EQ(stats(back), stats(ds));
  EXPECT_EQ(forest_from_dataset(back), forest_from_dataset(ds));
}

TEST(Course, FixtureCounts) {
  auto ds = testing_support::fixture_course("Data Mining", 93, 12723, 128);
  TempDir dir;
  auto path = dir.path() / "course.json";
  write(path, course_to_json(ds));
  EXPECT_EQ(stats(load_course(path)), (CourseStats{93, 12723, 128}));
}

TEST(Embeddings, DirectRead) {
  auto t = parse_embeddings("a 1.0 0.0\nb 0.0 1.0\n");
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(t.lookup("a"), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(t.lookup(kPadToken), (std::vector<double>{0.0, 0.0}));
}

TEST(Embeddings, HeaderDetected) {
  auto t = parse_embeddings("2 3\na 1 2 3\nb 4 5 6\n");
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.size(), 2u);
}

TEST(Embeddings, OovIsDeterministicAndBounded) {
  auto t = parse_embeddings("a 1.0 0.0 0.5\n", 17);
  auto v = t.lookup("zzz-oov");
  EXPECT_EQ(v, t.lookup("zzz-oov"));
  EXPECT_NE(v, t.lookup("other-oov"));
  for (double x : v) {
    EXPECT_GE(x, -0.1);
    EXPECT_LE(x, 0.1);
  }
  EXPECT_NE(v, parse_embeddings("a 1.0 0.0 0.5\n", 18).lookup("zzz-oov"));
}

TEST(Embeddings, Errors) {
  EXPECT_EQ(code_of([] { parse_embeddings("a 1 2\nb 1\n"); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { parse_embeddings(""); }), ErrorCode::EmptyTable);
}

TEST(Falt, LoadLookupAndFallback) {
  TempDir dir;
  write(dir.path() / "definition.txt",
        "In computer science, a stack is an abstract data type that serves as a collection of elements.\n");
  write(dir.path() / "empty.txt", "");
  write(dir.path() / "stack" / "operation.txt", "Stack operations push and pop.");
  FaltRepository repo = load_falt(dir.path());
  auto def = repo.lookup("stack", "definition");
  EXPECT_FALSE(def.fallback);
  EXPECT_NE(def.text.find("abstract data type"), std::string::npos);
  auto pop = repo.lookup("stack", "pop");
  EXPECT_TRUE(pop.fallback);
  EXPECT_EQ(pop.text, "pop");
  EXPECT_EQ(repo.lookup("stack", "operation").text, "Stack operations push and pop.");
  EXPECT_TRUE(repo.lookup("queue", "operation").fallback);
  EXPECT_FALSE(repo.warnings().empty());
}

TEST(Falt, MissingDirectory) {
  EXPECT_EQ(code_of([] { load_falt("/nonexistent/kforest-falt"); }), ErrorCode::EmptyRepository);
}

TEST(Outlines, LoadDirectory) {
  TempDir dir;
  write(dir.path() / "stack.wiki", "== Operation ==\n=== Push ===\n");
  write(dir.path() / "queue.txt", "Operation\n\tEnqueue\n");
  auto docs = load_outlines(dir.path());
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs.at("stack").entries.size(), 2u);
  EXPECT_EQ(docs.at("queue").topic, "queue");
}
