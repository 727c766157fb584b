#pragma once

// Learning-dependency extraction. Ordered topic pairs are described by how
// asymmetrically their core terms cross-occur and how close they sit in the
// topic hierarchy; a logistic model scores each direction.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kforest/core.hpp"

namespace kforest {

class Corpus {
 public:
  // One document per topic.
  explicit Corpus(const std::map<TopicId, std::string>& documents);

  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(const TopicId& topic) const { return index_.count(topic) > 0; }
  const std::vector<TopicId>& topics() const noexcept { return ids_; }

  const std::map<std::string, int>& term_counts(const TopicId& topic) const;
  int document_frequency(const std::string& term) const;
  double idf(const std::string& term) const;  // ln(N / df)

 private:
  std::vector<TopicId> ids_;
  std::map<TopicId, std::size_t> index_;
  std::vector<std::map<std::string, int>> counts_;
  std::map<std::string, int> df_;
};

// Document per topic: the label followed by its fragment texts in id order.
std::map<TopicId, std::string> topic_documents(const KnowledgeForest& forest);

// Top-k terms of a topic by tf * idf, ties lexicographic. Throws EmptyDocument.
std::vector<std::pair<std::string, double>> core_terms(const Corpus& corpus, const TopicId& topic, std::size_t k);

// Edges in the hypernym forest between two topics; nullopt if disconnected.
std::optional<int> hierarchy_distance(const std::map<TopicId, Topic>& topics, const TopicId& a, const TopicId& b);

struct PairFeatures {
  static constexpr std::size_t kCount = 5;
  // coverage(a->b), coverage(b->a), asymmetry, locality, token Jaccard
  std::array<double, kCount> values{};

  double coverage_ab() const noexcept { return values[0]; }
  double coverage_ba() const noexcept { return values[1]; }
  double asymmetry() const noexcept { return values[2]; }
  double locality() const noexcept { return values[3]; }
  double jaccard() const noexcept { return values[4]; }
};

// Throws EmptyDocument if either topic has no usable tokens.
PairFeatures pair_features(const TopicId& a, const TopicId& b, const Corpus& corpus,
                           const std::map<TopicId, Topic>& topics, std::size_t k = 10);

struct LabeledPair {
  PairFeatures features;
  int label = 0;  // 1: learn first before second
};

struct DepsTrainParams {
  double learning_rate = 0.5;
  int iterations = 500;
};

struct DependencyModel {
  std::array<double, PairFeatures::kCount> weights{};
  double bias = 0.0;
  std::array<double, PairFeatures::kCount> mean{};
  std::array<double, PairFeatures::kCount> spread{1.0, 1.0, 1.0, 1.0, 1.0};
  bool trained = false;
  double learning_rate = 0.0;     // rate actually used after any halving
  std::vector<double> loss_trace;  // mean cross-entropy before each step, then final

  double score(const PairFeatures& features) const;  // sigmoid, throws UntrainedModel
};

// Full-batch gradient descent on mean cross-entropy over standardized
// features. If the loss ever rises, the rate is halved and training restarts.
// Throws DegenerateLabels.
DependencyModel train_dependency_model(const std::vector<LabeledPair>& pairs, const DepsTrainParams& params = {});

struct DepsPredictParams {
  std::size_t core_terms = 10;
  int radius = 4;
};

// Repeatedly removes the lowest-score edge (ties: lexicographically smallest
// edge) on a detected cycle until the graph is acyclic.
std::map<DependencyEdge, double> break_cycles(std::map<DependencyEdge, double> edges);

// Scores every topic pair within the locality radius in both directions and
// keeps the stronger direction when it clears 0.5. Output is acyclic.
std::map<DependencyEdge, double> predict_dependencies(const DependencyModel& model,
                                                      const std::map<TopicId, Topic>& topics, const Corpus& corpus,
                                                      const DepsPredictParams& params = {});

// Positives plus negatives: explicit ones when given, otherwise the reverse
// of every positive and one seeded random non-edge within the radius.
std::vector<LabeledPair> training_pairs(const std::vector<DependencyEdge>& positives,
                                        const std::vector<DependencyEdge>& negatives,
                                        const std::map<TopicId, Topic>& topics, const Corpus& corpus,
                                        std::uint64_t seed, const DepsPredictParams& params = {});

}  // namespace kforest
