#pragma once

// The knowledge forest data model: topics, facet trees, knowledge fragments,
// materialized facet trees and the forest with its learning dependencies.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kforest {

using TopicId = std::string;

// Sequence of facet names from the topic root. The empty path is the root.
using FacetPath = std::vector<std::string>;

std::string format_path(const FacetPath& path);  // "operation/pop"
FacetPath parse_path(std::string_view text);     // inverse of format_path

struct Topic {
  TopicId id;
  std::string label;
  std::optional<TopicId> hypernym;

  // Builds a topic whose id is the slug of the label.
  static Topic from_label(std::string_view label, std::optional<TopicId> hypernym = std::nullopt);

  friend bool operator==(const Topic&, const Topic&) = default;
};

// A rooted tree of facets under one topic. The tree is stored as its set of
// facet paths; a well-formed tree contains every proper prefix of each path.
class FacetTree {
 public:
  FacetTree() = default;
  explicit FacetTree(TopicId topic) : topic_(std::move(topic)) {}

  const TopicId& topic() const noexcept { return topic_; }
  const std::set<FacetPath>& facets() const noexcept { return facets_; }
  std::size_t size() const noexcept { return facets_.size(); }
  bool empty() const noexcept { return facets_.empty(); }

  bool contains(const FacetPath& path) const { return path.empty() || facets_.count(path) > 0; }

  // Children names of a node, in sorted order.
  std::vector<std::string> children(const FacetPath& parent) const;

  // Facet-name set (the leaf name of every path).
  std::set<std::string> names() const;

  // (parent, child) pairs. The root is rendered as the topic id.
  std::vector<std::pair<std::string, std::string>> edges() const;

  // Raw insertion without invariant checks; used by loaders so that
  // validate() can report malformed input instead of failing early.
  void insert_unchecked(FacetPath path) { facets_.insert(std::move(path)); }

  friend bool operator==(const FacetTree&, const FacetTree&) = default;

 private:
  TopicId topic_;
  std::set<FacetPath> facets_;
};

struct KnowledgeFragment {
  std::string id;  // content hash of text
  TopicId topic;
  std::string text;

  static KnowledgeFragment make(TopicId topic, std::string text);

  friend bool operator==(const KnowledgeFragment&, const KnowledgeFragment&) = default;
};

struct MaterializedFacetTree {
  FacetTree tree;
  std::map<std::string, KnowledgeFragment> fragments;  // by fragment id
  std::set<std::pair<FacetPath, std::string>> assembly;

  friend bool operator==(const MaterializedFacetTree&, const MaterializedFacetTree&) = default;
};

using DependencyEdge = std::pair<TopicId, TopicId>;  // (learn first, learn after)

struct KnowledgeForest {
  std::map<TopicId, Topic> topics;
  std::map<TopicId, MaterializedFacetTree> mfts;
  std::map<DependencyEdge, double> dependencies;  // edge -> confidence in [0,1]

  // Adds a topic together with an empty materialized tree.
  void add_topic(const Topic& topic);

  friend bool operator==(const KnowledgeForest&, const KnowledgeForest&) = default;
};

FacetTree new_facet_tree(const Topic& topic);

// Returns a copy of tree with facet `name` added under `parent`.
// Throws UnknownParent, DuplicateSibling or EmptyAfterNormalization (empty name).
FacetTree add_facet(const FacetTree& tree, const FacetPath& parent, const std::string& name);

// Returns a copy of mft with (facet_path, fragment) in its assembly. The
// fragment is added to the fragment set if absent. Idempotent.
MaterializedFacetTree assemble_fragment(const MaterializedFacetTree& mft, const FacetPath& facet_path,
                                        const KnowledgeFragment& fragment);

enum class ViolationCode {
  InvalidTopicId,
  TopicKeyMismatch,
  UnknownHypernym,
  HypernymCycle,
  MissingTree,
  ExtraTree,
  TreeTopicMismatch,
  EmptyFacetName,
  OrphanFacet,
  EmptyFragment,
  FragmentTopicMismatch,
  FragmentIdMismatch,
  DanglingAssembly,
  UnknownDependencyTopic,
  SelfDependency,
  ScoreOutOfRange,
  CycleDetected,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool contains(ViolationCode code) const;
};

// Never throws on malformed data; every broken invariant becomes a violation.
ValidationReport validate(const KnowledgeForest& forest);

// Returns one cycle of the directed graph (first id repeated at the end) or
// an empty vector when the graph is acyclic. Deterministic.
std::vector<TopicId> find_cycle(const std::set<DependencyEdge>& edges);

// Topological order of all topics; ties broken by lexicographic topic id.
// Throws CycleError.
std::vector<TopicId> learning_order(const KnowledgeForest& forest);

// Every topic with a directed dependency path into `topic`.
// Throws UnknownTopic or CycleError.
std::set<TopicId> prerequisites(const KnowledgeForest& forest, const TopicId& topic);

std::set<DependencyEdge> edge_set(const KnowledgeForest& forest);

}  // namespace kforest
