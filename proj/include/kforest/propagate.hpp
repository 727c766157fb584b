#pragma once

// Facet propagation over the topic hierarchy. Each topic's facet
// probabilities are pulled toward the similarity-weighted average of its
// parent, children and brothers while its own outline facets stay pinned at
// 1. A facet joins a topic when its converged probability exceeds 0.5.

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kforest/core.hpp"

namespace kforest {

struct PropagationParams {
  double lambda = 0.7;     // propagation weight, [0, 1)
  double epsilon = 1e-4;   // stop once the max absolute change drops below this
  int max_iters = 100;
  double smoothing = 1.0;  // additive smoothing in facet_similarity

  static constexpr double kInclusionThreshold = 0.5;  // strict

  // Throws InvalidParams.
  void check() const;
};

struct NeighborPairs {
  std::set<std::pair<TopicId, TopicId>> parent_child;  // (parent, child)
  std::set<std::pair<TopicId, TopicId>> brothers;      // (a, b) with a < b
};

// Throws HypernymCycle (or UnknownTopic for a dangling hypernym).
NeighborPairs neighbor_pairs(const std::map<TopicId, Topic>& topics);

// (|a ∩ b| + s) / (|a ∪ b| + s).
double facet_similarity(const std::set<std::string>& a, const std::set<std::string>& b, double smoothing);

// Iterations within which the max change is guaranteed to fall below
// epsilon: ceil(log(eps * (1 - lambda)) / log(lambda)); 1 when lambda == 0.
int iteration_bound(double lambda, double epsilon);

class ProbabilityTable {
 public:
  ProbabilityTable() = default;
  ProbabilityTable(std::vector<TopicId> topics, std::vector<std::string> facets);

  const std::vector<TopicId>& topics() const noexcept { return topics_; }
  const std::vector<std::string>& facets() const noexcept { return facets_; }

  std::size_t topic_index(const TopicId& topic) const;  // throws UnknownTopic
  std::ptrdiff_t facet_index(const std::string& facet) const;  // -1 if absent

  std::span<double> row(std::size_t topic) { return {values_.data() + topic * facets_.size(), facets_.size()}; }
  std::span<const double> row(std::size_t topic) const {
    return {values_.data() + topic * facets_.size(), facets_.size()};
  }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  // 0 for facets outside the universe.
  double probability(const TopicId& topic, const std::string& facet) const;

  // Facet universe sorted by probability descending, ties by name.
  std::vector<std::pair<std::string, double>> ranked(const TopicId& topic) const;

 private:
  std::vector<TopicId> topics_;
  std::vector<std::string> facets_;
  std::vector<double> values_;  // row-major [topic][facet]
};

struct PropagationResult {
  std::map<TopicId, FacetTree> trees;
  ProbabilityTable table;
  std::vector<char> seeded;  // parallel to table.values()
  int iterations = 0;
  std::vector<double> max_changes;  // one per iteration

  bool is_seeded(const TopicId& topic, const std::string& facet) const;

  // "topic\tfacet\tprobability\tseeded" rows with a header line.
  std::string to_tsv() const;
};

// Called after every synchronous update with the 1-based iteration number.
using PropagationObserver = std::function<void(int, const ProbabilityTable&)>;

// Topics missing from `initial` start with an empty tree.
// Throws HypernymCycle, InvalidParams or NonFiniteProbability.
PropagationResult propagate(const std::map<TopicId, FacetTree>& initial, const std::map<TopicId, Topic>& hierarchy,
                            const PropagationParams& params, const PropagationObserver& observer = {});

}  // namespace kforest
