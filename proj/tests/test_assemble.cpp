#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "kforest/assemble.hpp"
#include "kforest/error.hpp"
#include "kforest/metrics.hpp"
#include "support.hpp"

using namespace kforest;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& x : m.data) x = rng.uniform(-1.0, 1.0);
  return m;
}

SimilarityChannels random_channels(Rng& rng, std::size_t r) {
  SimilarityChannels s;
  for (auto& ch : s.channels) ch = random_matrix(rng, r, r);
  return s;
}

// Two word clusters: operation words near e0, storage words near e1.
std::string stack_embeddings() {
  const std::vector<std::string> op = {"push", "pop", "operation", "operations", "adds", "removes", "top", "item"};
  const std::vector<std::string> st = {"storage", "array", "memory", "stored", "contiguous", "linked", "cells", "block"};
  std::string out;
  char buf[128];
  Rng rng(3);
  for (const auto& w : op) {
    std::snprintf(buf, sizeof buf, " 1 0 %.4f %.4f\n", rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    out += w + buf;
  }
  for (const auto& w : st) {
    std::snprintf(buf, sizeof buf, " 0 1 %.4f %.4f\n", rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    out += w + buf;
  }
  return out;
}

RepresentationParams small_rep() {
  RepresentationParams p;
  p.max_tokens = 24;
  p.feature_maps = 16;
  p.pooled_rows = 6;
  return p;
}

KnowledgeForest stack_training_forest(Rng& rng) {
  const std::vector<std::string> op = {"push", "pop", "operation", "adds", "removes", "top", "item"};
  const std::vector<std::string> st = {"storage", "array", "memory", "stored", "contiguous", "linked", "cells"};
  KnowledgeForest f;
  Topic t = Topic::from_label("Stack");
  f.add_topic(t);
  auto& mft = f.mfts.at(t.id);
  mft.tree.insert_unchecked({"operation"});
  mft.tree.insert_unchecked({"storage"});
  for (int i = 0; i < 30; ++i) {
    for (int side = 0; side < 2; ++side) {
      const auto& words = side == 0 ? op : st;
      std::string text = "the stack";
      for (int k = 0; k < 4; ++k) text += " " + words[rng.below(words.size())];
      text += " case " + std::to_string(i);
      auto frag = KnowledgeFragment::make(t.id, text);
      mft = assemble_fragment(mft, {side == 0 ? "operation" : "storage"}, frag);
    }
  }
  return f;
}

FaltRepository stack_falts() {
  FaltRepository repo;
  repo.insert("operation", "Stack operations push and pop adds and removes the top item.");
  repo.insert("storage", "Stack storage in an array or linked memory cells.");
  return repo;
}

}  // namespace

TEST(Representation, NgramConvolutionMatchesNaiveLoop) {
  Rng rng(1);
  for (std::size_t n : kNgramSizes) {
    Matrix x = random_matrix(rng, 9, 5);
    std::vector<double> w(4 * n * 5);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    Matrix out = ngram_convolution(x, w, n, 4);
    ASSERT_EQ(out.rows, 9 - n + 1);
    ASSERT_EQ(out.cols, 4u);
    for (std::size_t t = 0; t < out.rows; ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        double ref = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
          for (std::size_t c = 0; c < 5; ++c) ref += x.at(t + u, c) * w[(k * n + u) * 5 + c];
        }
        EXPECT_NEAR(out.at(t, k), ref, 1e-12);
      }
    }
  }
}

TEST(Representation, ConvolutionRejectsShortInput) {
  Matrix x(2, 3);
  std::vector<double> w(3 * 3);
  EXPECT_THROW(ngram_convolution(x, w, 3, 1), Error);
}

TEST(Representation, SegmentPoolCeilAndZeroTail) {
  Matrix m(5, 1);
  for (std::size_t i = 0; i < 5; ++i) m.at(i, 0) = static_cast<double>(i);
  Matrix p = segment_max_pool(m, 2);
  EXPECT_EQ(p.data, (std::vector<double>{2, 4}));
  Matrix q = segment_max_pool(m, 4);
  EXPECT_EQ(q.data, (std::vector<double>{1, 3, 4, 0}));
  Matrix short_m(2, 1);
  short_m.data = {5, 6};
  EXPECT_EQ(segment_max_pool(short_m, 4).data, (std::vector<double>{5, 6, 0, 0}));
}

TEST(Representation, DefaultShapes) {
  auto table = parse_embeddings(stack_embeddings());
  RepresentationParams params;
  auto filters = NgramFilters::seeded(table.dim(), params.feature_maps, params.seed);
  auto rep = represent("A push operation adds an item to the top of the stack.", table, filters, params);
  for (const auto& ch : rep.channels) {
    EXPECT_EQ(ch.rows, 16u);
    EXPECT_EQ(ch.cols, 64u);
    for (double v : ch.data) EXPECT_GE(v, 0.0);
  }
  auto sim = similarity_channels(rep, rep);
  for (const auto& ch : sim.channels) {
    EXPECT_EQ(ch.rows, 16u);
    EXPECT_EQ(ch.cols, 16u);
  }
}

TEST(Representation, CosineZeroRowAndRange) {
  FragmentRep a, b;
  for (std::size_t g = 0; g < 3; ++g) {
    a.channels[g] = Matrix(2, 2);
    b.channels[g] = Matrix(2, 2);
    a.channels[g].data = {1, 0, 0, 0};
    b.channels[g].data = {3, 0, 1, 1};
  }
  auto s = similarity_channels(a, b);
  EXPECT_DOUBLE_EQ(s.channels[0].at(0, 0), 1.0);
  EXPECT_NEAR(s.channels[0].at(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.channels[0].at(1, 0), 0.0);
  EXPECT_EQ(s.channels[0].at(1, 1), 0.0);
  b.channels[2] = Matrix(3, 2);
  EXPECT_THROW(similarity_channels(a, b), Error);
}

TEST(Head, ConvolutionMatchesNaiveZeroPadded) {
  Rng rng(2);
  auto head = SimilarityHead::seeded(5, 9);
  auto input = random_channels(rng, 5);
  auto act = head.convolve(input);
  const auto& p = head.parameters();
  const int r = 5;
  for (std::size_t k = 0; k < SimilarityHead::kMaps; ++k) {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) {
        double ref = p[head.conv_bias_offset() + k];
        for (std::size_t c = 0; c < 3; ++c) {
          for (int u = -1; u <= 1; ++u) {
            for (int v = -1; v <= 1; ++v) {
              if (i + u < 0 || i + u >= r || j + v < 0 || j + v >= r) continue;
              ref += p[((k * 3 + c) * 3 + static_cast<std::size_t>(u + 1)) * 3 + static_cast<std::size_t>(v + 1)] *
                     input.channels[c].at(static_cast<std::size_t>(i + u), static_cast<std::size_t>(j + v));
            }
          }
        }
        EXPECT_NEAR(act[(k * r + static_cast<std::size_t>(i)) * r + static_cast<std::size_t>(j)], ref, 1e-12);
      }
    }
  }
}

TEST(Head, ParameterLayout) {
  SimilarityHead head(16);
  EXPECT_EQ(head.pooled(), 8u);
  EXPECT_EQ(head.parameter_count(), 8u * 3 * 9 + 8 + 8 * 8 * 8 + 1);
  EXPECT_EQ(SimilarityHead(5).pooled(), 3u);
}

TEST(Head, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    auto model = AssemblerModel::create(small_rep(), 4, AssemblerTrainParams{.seed = 100 + static_cast<unsigned>(trial)});
    auto sample = random_channels(rng, model.head.rows());
    for (int label : {0, 1}) {
      auto report = grad_check_report(model, sample, label);
      EXPECT_LT(report.max_error, 1e-5);
      EXPECT_EQ(report.checked + report.skipped, model.head.parameter_count());
      EXPECT_GT(report.checked, model.head.parameter_count() * 3 / 4);
    }
  }
}

TEST(Training, SeparableClustersAndDecreasingLoss) {
  Rng rng(5);
  auto gold = stack_training_forest(rng);
  auto table = parse_embeddings(stack_embeddings());
  auto falts = stack_falts();
  auto model = AssemblerModel::create(small_rep(), table.dim());
  auto triples = assembly_triples(gold, 17);
  ASSERT_EQ(triples.size(), 120u);
  auto trace = train_assembler(model, triples, falts, table);
  ASSERT_TRUE(model.trained);
  ASSERT_EQ(trace.size(), static_cast<std::size_t>(model.training.epochs));
  EXPECT_LT(trace.back(), trace.front());

  int correct = 0;
  for (const auto& t : triples) {
    double p = model.score(t.fragment.text, falts.lookup(t.fragment.topic, t.facet.back()).text, table);
    correct += (p >= 0.5) == (t.label == 1);
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(triples.size()), 0.95);

  // The push fragment of the stack example lands on its operation facet.
  auto stack = testing_support::stack_forest();
  const auto& mft = stack.mfts.at("stack");
  auto frag = mft.fragments.begin()->second;
  auto assigned = assign_facets(model, frag, mft.tree, falts, table, true);
  EXPECT_TRUE(assigned.count({"operation"}));
  EXPECT_FALSE(assigned.count({"storage"}));

  FaltRepCache cache;
  EXPECT_EQ(assign_facets(model, frag, mft.tree, falts, table, true, &cache), assigned);
}

TEST(Training, Errors) {
  auto model = AssemblerModel::create(small_rep(), 4);
  EXPECT_THROW(train_head(model, {}), Error);
  auto table = parse_embeddings(stack_embeddings());
  auto frag = KnowledgeFragment::make("stack", "push");
  FacetTree tree("stack");
  tree.insert_unchecked({"operation"});
  try {
    assign_facets(model, frag, tree, stack_falts(), table, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UntrainedModel);
  }
  model.trained = true;
  try {
    assign_facets(model, frag, FacetTree("stack"), stack_falts(), table, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyFacetTree);
  }
}

TEST(Triples, OnePositiveOneNegativePerAssembly) {
  auto forest = testing_support::stack_forest();
  auto triples = assembly_triples(forest, 1);
  ASSERT_EQ(triples.size(), 2u);
  EXPECT_EQ(triples[0].label + triples[1].label, 1);
  for (const auto& t : triples) {
    if (t.label == 1) EXPECT_EQ(t.facet, (FacetPath{"operation"}));
    else EXPECT_NE(t.facet, (FacetPath{"operation"}));
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  auto table = parse_embeddings(stack_embeddings());
  Rng rng(6);
  auto gold = stack_training_forest(rng);
  auto model = AssemblerModel::create(small_rep(), table.dim(), AssemblerTrainParams{.epochs = 2});
  train_assembler(model, assembly_triples(gold, 3), stack_falts(), table);
  auto text = save_checkpoint(model);
  auto back = load_checkpoint(text);
  EXPECT_EQ(back, model);
  EXPECT_EQ(save_checkpoint(back), text);
}

TEST(Checkpoint, RejectsForeignDocuments) {
  for (const char* bad : {"", "{}", R"({"format": "other", "version": 1})", R"({"format": "kforest-assembler", "version": 9})"}) {
    try {
      load_checkpoint(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    }
  }
}
