#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "kforest/core.hpp"
#include "kforest/ingest.hpp"
#include "kforest/text.hpp"

namespace testing_support {

using namespace kforest;

// The Stack example: linear-list -> stack, stack has operation/{push,pop}
// and storage, one assembled fragment.
inline KnowledgeForest stack_forest() {
  KnowledgeForest f;
  Topic ds = Topic::from_label("Data structure");
  Topic ll = Topic::from_label("Linear list", ds.id);
  Topic st = Topic::from_label("Stack", ds.id);
  f.add_topic(ds);
  f.add_topic(ll);
  f.add_topic(st);
  FacetTree t = new_facet_tree(st);
  t = add_facet(t, {}, "operation");
  t = add_facet(t, {"operation"}, "push");
  t = add_facet(t, {"operation"}, "pop");
  t = add_facet(t, {}, "storage");
  f.mfts[st.id].tree = t;
  auto frag = KnowledgeFragment::make(st.id, "A push operation adds an item to the top-most location on the stack.");
  f.mfts[st.id] = assemble_fragment(f.mfts[st.id], {"operation"}, frag);
  f.dependencies[{ll.id, st.id}] = 0.9;
  return f;
}

inline std::string random_name(Rng& rng, std::size_t max_len = 8) {
  static const char* alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::size_t len = 1 + rng.below(max_len);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(i == 0 ? 26 : 36)]);
  return s;
}

// Random valid forest: hypernym tree, facet trees, fragments with assembly
// and an acyclic dependency set (edges from lower to higher index).
inline KnowledgeForest random_forest(Rng& rng, std::size_t max_topics = 12) {
  KnowledgeForest f;
  std::size_t n = rng.below(max_topics + 1);
  std::vector<TopicId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    Topic t;
    t.id = "t" + std::to_string(i) + "-" + random_name(rng, 4);
    t.label = "Label " + random_name(rng) + (rng.bernoulli(0.2) ? " \"q\" \\ é\n" : "");
    if (i > 0 && rng.bernoulli(0.7)) t.hypernym = ids[rng.below(ids.size())];
    ids.push_back(t.id);
    f.add_topic(t);
    FacetTree tree(t.id);
    std::vector<FacetPath> nodes = {{}};
    std::size_t facets = rng.below(6);
    for (std::size_t k = 0; k < facets; ++k) {
      FacetPath parent = nodes[rng.below(nodes.size())];
      std::string name = random_name(rng) + (rng.bernoulli(0.1) ? " x%y é" : "");
      FacetPath child = parent;
      child.push_back(name);
      if (tree.contains(child)) continue;
      tree.insert_unchecked(child);
      nodes.push_back(child);
    }
    f.mfts[t.id].tree = tree;
    std::size_t frags = rng.below(4);
    for (std::size_t k = 0; k < frags; ++k) {
      auto frag = KnowledgeFragment::make(t.id, "text " + random_name(rng) + " " + std::to_string(rng.next() % 1000));
      auto& mft = f.mfts[t.id];
      mft.fragments.emplace(frag.id, frag);
      if (nodes.size() > 1 && rng.bernoulli(0.7)) {
        mft.assembly.emplace(nodes[1 + rng.below(nodes.size() - 1)], frag.id);
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (rng.bernoulli(0.15)) f.dependencies[{ids[a], ids[b]}] = static_cast<double>(rng.below(1001)) / 1000.0;
    }
  }
  return f;
}

// A course dataset with exactly the requested counts.
inline CourseDataset fixture_course(const std::string& name, std::size_t topics, std::size_t fragments,
                                    std::size_t dependencies) {
  CourseDataset ds;
  ds.name = name;
  for (std::size_t i = 0; i < topics; ++i) {
    Topic t;
    t.id = "topic-" + std::to_string(i);
    t.label = "Topic " + std::to_string(i);
    if (i > 0) t.hypernym = "topic-" + std::to_string((i - 1) / 3);
    ds.topics.push_back(t);
    FacetTree tree(t.id);
    tree.insert_unchecked({"definition"});
    ds.facet_trees[t.id] = tree;
  }
  for (std::size_t k = 0; k < fragments; ++k) {
    ds.fragments.push_back({"topic-" + std::to_string(k % topics), "fragment number " + std::to_string(k),
                            {{"definition"}}});
  }
  // Forward edges i -> j (i < j) in a fixed enumeration are acyclic.
  std::size_t made = 0;
  for (std::size_t gap = 1; made < dependencies; ++gap) {
    for (std::size_t i = 0; i + gap < topics && made < dependencies; ++i, ++made) {
      ds.dependencies.push_back({{"topic-" + std::to_string(i), "topic-" + std::to_string(i + gap)}, 1.0});
    }
  }
  return ds;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "kforest-XXXXXX").string();
    path_ = mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
