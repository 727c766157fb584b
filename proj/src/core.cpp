#include "kforest/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "kforest/error.hpp"
#include "kforest/text.hpp"

namespace kforest {

std::string format_path(const FacetPath& path) {
  std::string out;
  for (const auto& name : path) {
    if (!out.empty()) out.push_back('/');
    out += name;
  }
  return out;
}

FacetPath parse_path(std::string_view text) {
  FacetPath path;
  while (!text.empty()) {
    auto slash = text.find('/');
    path.emplace_back(text.substr(0, slash));
    if (slash == std::string_view::npos) break;
    text.remove_prefix(slash + 1);
  }
  return path;
}

Topic Topic::from_label(std::string_view label, std::optional<TopicId> hypernym) {
  return Topic{slugify(label), std::string(label), std::move(hypernym)};
}

std::vector<std::string> FacetTree::children(const FacetPath& parent) const {
  std::vector<std::string> out;
  for (const auto& path : facets_) {
    if (path.size() == parent.size() + 1 && std::equal(parent.begin(), parent.end(), path.begin())) {
      out.push_back(path.back());
    }
  }
  return out;
}

std::set<std::string> FacetTree::names() const {
  std::set<std::string> out;
  for (const auto& path : facets_) out.insert(path.back());
  return out;
}

std::vector<std::pair<std::string, std::string>> FacetTree::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& path : facets_) {
    out.emplace_back(path.size() == 1 ? topic_ : path[path.size() - 2], path.back());
  }
  return out;
}

KnowledgeFragment KnowledgeFragment::make(TopicId topic, std::string text) {
  auto id = fragment_id(text);
  return KnowledgeFragment{std::move(id), std::move(topic), std::move(text)};
}

void KnowledgeForest::add_topic(const Topic& topic) {
  topics[topic.id] = topic;
  auto& mft = mfts[topic.id];
  if (mft.tree.topic().empty()) mft.tree = FacetTree(topic.id);
}

FacetTree new_facet_tree(const Topic& topic) { return FacetTree(topic.id); }

FacetTree add_facet(const FacetTree& tree, const FacetPath& parent, const std::string& name) {
  if (name.empty()) throw Error(ErrorCode::EmptyAfterNormalization, "facet name is empty");
  if (!tree.contains(parent)) {
    throw Error(ErrorCode::UnknownParent, "no facet '" + format_path(parent) + "' in tree of " + tree.topic());
  }
  FacetPath child = parent;
  child.push_back(name);
  if (tree.facets().count(child)) {
    throw Error(ErrorCode::DuplicateSibling, "facet '" + format_path(child) + "' already exists");
  }
  FacetTree out = tree;
  out.insert_unchecked(std::move(child));
  return out;
}

MaterializedFacetTree assemble_fragment(const MaterializedFacetTree& mft, const FacetPath& facet_path,
                                        const KnowledgeFragment& fragment) {
  if (fragment.topic != mft.tree.topic()) {
    throw Error(ErrorCode::TopicMismatch,
                "fragment of topic '" + fragment.topic + "' cannot join tree of '" + mft.tree.topic() + "'");
  }
  if (facet_path.empty() || !mft.tree.contains(facet_path)) {
    throw Error(ErrorCode::UnknownFacet, "no facet '" + format_path(facet_path) + "' in " + mft.tree.topic());
  }
  MaterializedFacetTree out = mft;
  out.fragments.emplace(fragment.id, fragment);
  out.assembly.emplace(facet_path, fragment.id);
  return out;
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::InvalidTopicId: return "InvalidTopicId";
    case ViolationCode::TopicKeyMismatch: return "TopicKeyMismatch";
    case ViolationCode::UnknownHypernym: return "UnknownHypernym";
    case ViolationCode::HypernymCycle: return "HypernymCycle";
    case ViolationCode::MissingTree: return "MissingTree";
    case ViolationCode::ExtraTree: return "ExtraTree";
    case ViolationCode::TreeTopicMismatch: return "TreeTopicMismatch";
    case ViolationCode::EmptyFacetName: return "EmptyFacetName";
    case ViolationCode::OrphanFacet: return "OrphanFacet";
    case ViolationCode::EmptyFragment: return "EmptyFragment";
    case ViolationCode::FragmentTopicMismatch: return "FragmentTopicMismatch";
    case ViolationCode::FragmentIdMismatch: return "FragmentIdMismatch";
    case ViolationCode::DanglingAssembly: return "DanglingAssembly";
    case ViolationCode::UnknownDependencyTopic: return "UnknownDependencyTopic";
    case ViolationCode::SelfDependency: return "SelfDependency";
    case ViolationCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ViolationCode::CycleDetected: return "CycleDetected";
  }
  return "Unknown";
}

bool ValidationReport::contains(ViolationCode code) const {
  return std::any_of(violations.begin(), violations.end(), [code](const Violation& v) { return v.code == code; });
}

namespace {

void validate_tree(const TopicId& key, const MaterializedFacetTree& mft, ValidationReport& report) {
  auto add = [&](ViolationCode code, std::string msg) { report.violations.push_back({code, std::move(msg)}); };
  if (mft.tree.topic() != key) {
    add(ViolationCode::TreeTopicMismatch, "tree stored under '" + key + "' has root '" + mft.tree.topic() + "'");
  }
  for (const auto& path : mft.tree.facets()) {
    if (path.empty() || std::any_of(path.begin(), path.end(), [](const std::string& n) { return n.empty(); })) {
      add(ViolationCode::EmptyFacetName, key + ": facet path '" + format_path(path) + "' has an empty name");
      continue;
    }
    FacetPath parent(path.begin(), path.end() - 1);
    if (!mft.tree.contains(parent)) {
      add(ViolationCode::OrphanFacet, key + ": facet '" + format_path(path) + "' is unreachable from the root");
    }
  }
  for (const auto& [id, fragment] : mft.fragments) {
    if (trim(fragment.text).empty()) add(ViolationCode::EmptyFragment, key + ": fragment " + id + " is blank");
    if (fragment.topic != key) {
      add(ViolationCode::FragmentTopicMismatch, key + ": fragment " + id + " belongs to '" + fragment.topic + "'");
    }
    if (fragment.id != id || fragment.id != fragment_id(fragment.text)) {
      add(ViolationCode::FragmentIdMismatch, key + ": fragment " + id + " id does not match its content hash");
    }
  }
  for (const auto& [path, id] : mft.assembly) {
    if (path.empty() || !mft.tree.facets().count(path)) {
      add(ViolationCode::DanglingAssembly, key + ": assembly references missing facet '" + format_path(path) + "'");
    }
    if (!mft.fragments.count(id)) {
      add(ViolationCode::DanglingAssembly, key + ": assembly references missing fragment " + id);
    }
  }
}

}  // namespace

ValidationReport validate(const KnowledgeForest& forest) {
  ValidationReport report;
  auto add = [&](ViolationCode code, std::string msg) { report.violations.push_back({code, std::move(msg)}); };

  for (const auto& [key, topic] : forest.topics) {
    if (!is_valid_slug(topic.id)) add(ViolationCode::InvalidTopicId, "topic id '" + topic.id + "' is not a slug");
    if (topic.id != key) add(ViolationCode::TopicKeyMismatch, "topic '" + topic.id + "' stored under '" + key + "'");
    if (topic.hypernym && !forest.topics.count(*topic.hypernym)) {
      add(ViolationCode::UnknownHypernym, "topic '" + key + "' has unknown hypernym '" + *topic.hypernym + "'");
    }
  }

  // Hypernym cycles: follow each chain; a chain longer than the topic count
  // or revisiting a node is a cycle. Report each cycle once by its min id.
  std::set<TopicId> cycle_reported;
  for (const auto& [key, topic] : forest.topics) {
    std::vector<TopicId> chain{key};
    std::set<TopicId> seen{key};
    auto cur = topic.hypernym;
    while (cur) {
      auto it = forest.topics.find(*cur);
      if (it == forest.topics.end()) break;
      if (seen.count(*cur)) {
        auto start = std::find(chain.begin(), chain.end(), *cur);
        std::vector<TopicId> cyc(start, chain.end());
        auto min_id = *std::min_element(cyc.begin(), cyc.end());
        if (cycle_reported.insert(min_id).second) {
          add(ViolationCode::HypernymCycle, "hypernym cycle through '" + min_id + "'");
        }
        break;
      }
      seen.insert(*cur);
      chain.push_back(*cur);
      cur = it->second.hypernym;
    }
  }

  for (const auto& [key, topic] : forest.topics) {
    if (!forest.mfts.count(key)) add(ViolationCode::MissingTree, "topic '" + key + "' has no facet tree");
  }
  for (const auto& [key, mft] : forest.mfts) {
    if (!forest.topics.count(key)) {
      add(ViolationCode::ExtraTree, "facet tree for unknown topic '" + key + "'");
    }
    validate_tree(key, mft, report);
  }

  std::set<DependencyEdge> edges;
  for (const auto& [edge, score] : forest.dependencies) {
    const auto& [from, to] = edge;
    std::string name = "(" + from + ", " + to + ")";
    if (!forest.topics.count(from) || !forest.topics.count(to)) {
      add(ViolationCode::UnknownDependencyTopic, "dependency " + name + " references an unknown topic");
    }
    if (from == to) add(ViolationCode::SelfDependency, "self dependency on '" + from + "'");
    if (!(score >= 0.0 && score <= 1.0)) add(ViolationCode::ScoreOutOfRange, "dependency " + name + " score");
    if (from != to) edges.insert(edge);
  }
  auto cycle = find_cycle(edges);
  if (!cycle.empty()) {
    std::string msg = "dependency cycle";
    for (const auto& id : cycle) msg += " " + id;
    add(ViolationCode::CycleDetected, msg);
  }
  return report;
}

std::vector<TopicId> find_cycle(const std::set<DependencyEdge>& edges) {
  std::map<TopicId, std::vector<TopicId>> adj;
  for (const auto& [from, to] : edges) {
    adj[from].push_back(to);
    adj[to];
  }
  enum class Mark { White, Grey, Black };
  std::map<TopicId, Mark> mark;
  for (const auto& [node, _] : adj) mark[node] = Mark::White;

  // Iterative DFS; adjacency lists are sorted because edges is an ordered set.
  for (const auto& [root, _] : adj) {
    if (mark[root] != Mark::White) continue;
    std::vector<std::pair<TopicId, std::size_t>> stack{{root, 0}};
    mark[root] = Mark::Grey;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& out = adj[node];
      if (next == out.size()) {
        mark[node] = Mark::Black;
        stack.pop_back();
        continue;
      }
      const TopicId child = out[next++];
      if (mark[child] == Mark::Grey) {
        std::vector<TopicId> cycle;
        auto it = std::find_if(stack.begin(), stack.end(), [&](const auto& f) { return f.first == child; });
        for (; it != stack.end(); ++it) cycle.push_back(it->first);
        cycle.push_back(child);
        return cycle;
      }
      if (mark[child] == Mark::White) {
        mark[child] = Mark::Grey;
        stack.emplace_back(child, 0);
      }
    }
  }
  return {};
}

std::set<DependencyEdge> edge_set(const KnowledgeForest& forest) {
  std::set<DependencyEdge> edges;
  for (const auto& [edge, _] : forest.dependencies) edges.insert(edge);
  return edges;
}

std::vector<TopicId> learning_order(const KnowledgeForest& forest) {
  auto edges = edge_set(forest);
  std::map<TopicId, std::vector<TopicId>> adj;
  std::map<TopicId, std::size_t> indegree;
  for (const auto& [id, _] : forest.topics) indegree[id] = 0;
  for (const auto& [from, to] : edges) {
    if (from == to) throw CycleError({from, to});
    adj[from].push_back(to);
    indegree[from];
    ++indegree[to];
  }
  std::priority_queue<TopicId, std::vector<TopicId>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  std::vector<TopicId> order;
  while (!ready.empty()) {
    TopicId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : adj[id]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  if (order.size() != indegree.size()) throw CycleError(find_cycle(edges));
  return order;
}

std::set<TopicId> prerequisites(const KnowledgeForest& forest, const TopicId& topic) {
  if (!forest.topics.count(topic)) throw Error(ErrorCode::UnknownTopic, "no topic '" + topic + "'");
  auto edges = edge_set(forest);
  auto cycle = find_cycle(edges);
  if (!cycle.empty()) throw CycleError(std::move(cycle));

  std::map<TopicId, std::vector<TopicId>> reverse;
  for (const auto& [from, to] : edges) reverse[to].push_back(from);
  std::set<TopicId> seen;
  std::vector<TopicId> frontier{topic};
  while (!frontier.empty()) {
    TopicId cur = frontier.back();
    frontier.pop_back();
    for (const auto& pre : reverse[cur]) {
      if (seen.insert(pre).second) frontier.push_back(pre);
    }
  }
  return seen;
}

}  // namespace kforest
