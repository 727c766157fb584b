#pragma once

// Evaluation measures and the synthetic course generator used as planted
// ground truth.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kforest/core.hpp"
#include "kforest/ingest.hpp"

namespace kforest {

class ProbabilityTable;

// Facets ordered by descending score; no duplicates.
struct RankedPrediction {
  std::vector<std::pair<std::string, double>> items;

  bool well_formed() const;
};

// Binary-relevance nDCG@k; 1 when gold is empty.
double ndcg(const RankedPrediction& predicted, const std::set<std::string>& gold, std::size_t k);

// Unweighted mean of per-label F1 over labels that occur in gold or
// predictions. Throws NoActiveLabels.
double macro_f(const std::vector<std::set<std::string>>& predicted, const std::vector<std::set<std::string>>& gold,
               const std::set<std::string>& universe);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

template <typename T>
Prf prf(const std::set<T>& predicted, const std::set<T>& gold) {
  if (predicted.empty() && gold.empty()) return {1.0, 1.0, 1.0};
  std::size_t hit = 0;
  for (const auto& p : predicted) hit += gold.count(p);
  Prf out;
  out.precision = predicted.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
  out.recall = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
  double s = out.precision + out.recall;
  out.f1 = s == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / s;
  return out;
}

// Per-topic nDCG of the probability ranking against gold facet-name sets with
// k = |gold|, averaged over the topics present in gold.
double facet_ndcg(const ProbabilityTable& table, const std::map<TopicId, std::set<std::string>>& gold);

struct SyntheticCourseSpec {
  std::uint64_t seed = 42;
  std::size_t topics = 100;
  std::size_t max_children = 4;
  std::size_t root_categories = 5;     // top-level facets of the root topic
  double drop_probability = 0.05;      // per inherited facet
  double extra_probability = 0.3;      // chance a child gains one facet
  double hide_probability = 0.3;       // per true facet, withheld from the outline
  std::size_t fragments_per_facet = 2;
  std::size_t topic_terms = 8;         // unique vocabulary per topic
  double dependency_density = 0.6;     // planted edges per topic
  int dependency_radius = 4;
  std::size_t embedding_dim = 16;

  void check() const;  // throws InvalidSpec
};

struct SyntheticTruth {
  std::map<TopicId, FacetTree> true_trees;
  std::map<TopicId, FacetTree> visible_trees;
  std::map<TopicId, std::set<std::string>> withheld;  // facet names
  std::set<DependencyEdge> planted;
};

struct SyntheticCourse {
  CourseDataset dataset;  // gold: true trees, labelled fragments, planted edges
  SyntheticTruth truth;
  std::map<TopicId, OutlineDocument> outlines;  // visible facets only
  std::map<std::string, std::string> falts;     // facet name -> label text
  std::string embeddings;                       // embedding file contents
};

SyntheticCourse synth_course(const SyntheticCourseSpec& spec);

// Every facet keyword the generator can emit.
const std::vector<std::string>& synthetic_facet_vocabulary();

// Writes dataset.json, truth.json, outlines/, falt/, embeddings.txt.
void write_synthetic_course(const SyntheticCourse& course, const std::filesystem::path& dir);

}  // namespace kforest
