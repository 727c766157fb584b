#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "kforest/deps.hpp"
#include "kforest/error.hpp"
#include "kforest/metrics.hpp"
#include "kforest/propagate.hpp"
#include "kforest/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace kforest {

namespace {

struct Category {
  std::string name;
  std::vector<std::string> children;
};

const std::vector<Category>& taxonomy() {
  static const std::vector<Category> cats = {
      {"definition", {"notation", "terminology"}},
      {"property", {"complexity", "invariant"}},
      {"operation", {"insertion", "deletion", "search"}},
      {"implementation", {"storage", "pointer"}},
      {"application", {"scheduling", "parsing"}},
      {"history", {"origin"}},
      {"example", {"exercise", "illustration"}},
      {"analysis", {"proof", "bound"}},
      {"variant", {"generalization", "specialization"}},
      {"algorithm", {"traversal", "sorting"}},
      {"representation", {"diagram", "encoding"}},
      {"comparison", {"advantage", "limitation"}},
  };
  return cats;
}

const std::vector<std::string> kFiller = {"element", "value",   "method", "process", "result", "case",
                                          "form",    "part",    "step",   "rule",    "approach", "concept",
                                          "model",   "system",  "data",   "order",   "level",  "unit",
                                          "object",  "quantity", "pattern", "record", "state",  "range"};

const std::vector<std::string> kTemplateWords = {"topic", "described", "through", "involves", "together",
                                                 "uses",  "applies",   "every",   "consider", "builds",
                                                 "facet", "concepts",  "details", "relates"};

std::string topic_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "topic-%03zu", i);
  return buf;
}

std::string topic_label(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "Topic %03zu", i);
  return buf;
}

std::string topic_term(std::size_t i, std::size_t j) { return "tt" + std::to_string(i) + "w" + std::to_string(j); }

std::string pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

OutlineDocument outline_of(const TopicId& topic, const FacetTree& tree) {
  OutlineDocument doc{topic, {}};
  // std::set order over paths is already a pre-order walk.
  for (const auto& p : tree.facets()) doc.entries.push_back({p.back(), static_cast<int>(p.size())});
  return doc;
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, " %.6f", v);
  out += buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

const std::vector<std::string>& synthetic_facet_vocabulary() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& c : taxonomy()) {
      out.push_back(c.name);
      out.insert(out.end(), c.children.begin(), c.children.end());
    }
    return out;
  }();
  return names;
}

void SyntheticCourseSpec::check() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidSpec, std::string(what) + " must be in [0, 1]");
  };
  prob(drop_probability, "drop_probability");
  prob(extra_probability, "extra_probability");
  prob(hide_probability, "hide_probability");
  if (topics == 0) throw Error(ErrorCode::InvalidSpec, "topics must be positive");
  if (max_children == 0) throw Error(ErrorCode::InvalidSpec, "max_children must be positive");
  if (root_categories == 0 || root_categories > taxonomy().size()) {
    throw Error(ErrorCode::InvalidSpec, "root_categories out of range");
  }
  if (fragments_per_facet == 0) throw Error(ErrorCode::InvalidSpec, "fragments_per_facet must be positive");
  if (topic_terms == 0) throw Error(ErrorCode::InvalidSpec, "topic_terms must be positive");
  if (!(dependency_density >= 0.0) || !std::isfinite(dependency_density)) {
    throw Error(ErrorCode::InvalidSpec, "dependency_density must be non-negative");
  }
  if (dependency_radius < 1) throw Error(ErrorCode::InvalidSpec, "dependency_radius must be at least 1");
  if (embedding_dim == 0) throw Error(ErrorCode::InvalidSpec, "embedding_dim must be positive");
}

SyntheticCourse synth_course(const SyntheticCourseSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  SyntheticCourse out;
  out.dataset.name = "synthetic-" + std::to_string(spec.seed);

  // Topic tree.
  std::vector<std::size_t> child_count(spec.topics, 0);
  std::vector<std::optional<std::size_t>> parent(spec.topics);
  std::map<TopicId, Topic> topics;
  for (std::size_t i = 0; i < spec.topics; ++i) {
    Topic t{topic_id(i), topic_label(i), std::nullopt};
    if (i > 0) {
      std::vector<std::size_t> open;
      for (std::size_t j = 0; j < i; ++j) {
        if (child_count[j] < spec.max_children) open.push_back(j);
      }
      std::size_t p = open[rng.below(open.size())];
      ++child_count[p];
      parent[i] = p;
      t.hypernym = topic_id(p);
    }
    topics.emplace(t.id, t);
    out.dataset.topics.push_back(t);
  }

  // True facet trees.
  const auto& cats = taxonomy();
  std::vector<std::set<FacetPath>> truth(spec.topics);
  {
    std::vector<std::size_t> order(cats.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t c = 0; c < spec.root_categories; ++c) {
      const auto& cat = cats[order[c]];
      truth[0].insert({cat.name});
      for (const auto& ch : cat.children) truth[0].insert({cat.name, ch});
    }
  }
  for (std::size_t i = 1; i < spec.topics; ++i) {
    const auto& inherited = truth[*parent[i]];
    std::set<FacetPath> mine;
    std::set<std::string> dropped_categories;
    for (const auto& p : inherited) {
      if (p.size() == 2 && dropped_categories.count(p[0])) continue;
      if (rng.bernoulli(spec.drop_probability)) {
        if (p.size() == 1) dropped_categories.insert(p[0]);
        continue;
      }
      mine.insert(p);
    }
    if (rng.bernoulli(spec.extra_probability)) {
      std::vector<FacetPath> options;
      for (const auto& c : cats) {
        if (!mine.count({c.name})) {
          options.push_back({c.name});
          continue;
        }
        for (const auto& ch : c.children) {
          if (!mine.count({c.name, ch})) options.push_back({c.name, ch});
        }
      }
      if (!options.empty()) mine.insert(options[rng.below(options.size())]);
    }
    if (mine.empty()) mine = inherited;
    truth[i] = std::move(mine);
  }

  // Close the true trees under propagation so that complete evidence is a
  // fixpoint.
  for (;;) {
    std::map<TopicId, FacetTree> current;
    for (std::size_t i = 0; i < spec.topics; ++i) {
      FacetTree t(topic_id(i));
      for (const auto& p : truth[i]) t.insert_unchecked(p);
      current.emplace(t.topic(), std::move(t));
    }
    auto result = propagate(current, topics, PropagationParams{});
    bool grew = false;
    for (std::size_t i = 0; i < spec.topics; ++i) {
      const auto& after = result.trees.at(topic_id(i)).facets();
      if (after.size() != truth[i].size()) {
        truth[i] = after;
        grew = true;
      }
    }
    if (!grew) break;
  }

  // Visible subsets: each facet is withheld independently; a facet with a
  // visible descendant stays visible so the outline remains a tree.
  std::vector<std::set<FacetPath>> visible(spec.topics);
  for (std::size_t i = 0; i < spec.topics; ++i) {
    for (const auto& p : truth[i]) {
      if (rng.bernoulli(spec.hide_probability)) continue;
      for (std::size_t len = 1; len <= p.size(); ++len) visible[i].insert(FacetPath(p.begin(), p.begin() + len));
    }
  }

  // Un-hide withheld facets that no neighbour shows, until every withheld
  // facet is visible in at least one neighbour.
  auto pairs = neighbor_pairs(topics);
  std::vector<std::vector<std::size_t>> neighbours(spec.topics);
  auto index_of = [](const TopicId& id) { return static_cast<std::size_t>(std::stoul(id.substr(6))); };
  for (const auto* set : {&pairs.parent_child, &pairs.brothers}) {
    for (const auto& [a, b] : *set) {
      neighbours[index_of(a)].push_back(index_of(b));
      neighbours[index_of(b)].push_back(index_of(a));
    }
  }
  auto shown_by = [&](std::size_t i, const std::string& name) {
    for (std::size_t n : neighbours[i]) {
      for (const auto& p : visible[n]) {
        if (p.back() == name) return true;
      }
    }
    return false;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < spec.topics; ++i) {
      for (const auto& p : truth[i]) {
        if (visible[i].count(p) || shown_by(i, p.back())) continue;
        visible[i].insert(p);
        if (p.size() == 2) visible[i].insert({p[0]});
        changed = true;
      }
    }
  }

  for (std::size_t i = 0; i < spec.topics; ++i) {
    TopicId id = topic_id(i);
    FacetTree t(id), v(id);
    for (const auto& p : truth[i]) t.insert_unchecked(p);
    for (const auto& p : visible[i]) v.insert_unchecked(p);
    std::set<std::string> withheld;
    for (const auto& p : truth[i]) {
      if (!visible[i].count(p)) withheld.insert(p.back());
    }
    out.truth.withheld[id] = std::move(withheld);
    out.outlines[id] = outline_of(id, v);
    out.truth.true_trees[id] = t;
    out.truth.visible_trees[id] = v;
    out.dataset.facet_trees[id] = t;
  }

  // Fragments.
  static const std::array<const char*, 4> templates = {
      "The %s of %s is described through %s and the %s %s.",
      "In %s, the %s involves %s together with a %s %s.",
      "Each %s for %s uses %s as %s %s.",
      "Consider the %s: %s applies %s to every %s %s.",
  };
  std::vector<std::vector<std::size_t>> fragments_of(spec.topics);
  std::set<std::string> seen_texts;
  for (std::size_t i = 0; i < spec.topics; ++i) {
    TopicId id = topic_id(i);
    std::string label = topic_label(i);
    std::size_t next_term = 0;  // round robin keeps topic term frequencies level
    for (const auto& p : truth[i]) {
      for (std::size_t f = 0; f < spec.fragments_per_facet; ++f) {
        std::size_t which = rng.below(templates.size());
        std::string term = topic_term(i, next_term++ % spec.topic_terms);
        term += " " + topic_term(i, next_term++ % spec.topic_terms);
        std::string f1 = pick(rng, kFiller), f2 = pick(rng, kFiller);
        const std::string& kw = p.back();
        char buf[512];
        const std::string& first = which == 1 ? label : kw;
        const std::string& second = which == 1 ? kw : label;
        std::snprintf(buf, sizeof buf, templates[which], first.c_str(), second.c_str(), term.c_str(), f1.c_str(),
                      f2.c_str());
        std::string text = buf;
        for (int n = 0; !seen_texts.insert(text).second; ++n) text = std::string(buf) + " v" + std::to_string(n);
        fragments_of[i].push_back(out.dataset.fragments.size());
        out.dataset.fragments.push_back({id, std::move(text), {p}});
      }
    }
  }

  // Planted dependencies: earlier topic first, its private vocabulary
  // injected into the later topic's fragments.
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t a = 0; a < spec.topics; ++a) {
    for (std::size_t b = a + 1; b < spec.topics; ++b) {
      auto d = hierarchy_distance(topics, topic_id(a), topic_id(b));
      if (d && *d <= spec.dependency_radius) candidates.emplace_back(a, b);
    }
  }
  rng.shuffle(candidates);
  auto wanted = static_cast<std::size_t>(std::llround(spec.dependency_density * static_cast<double>(spec.topics)));
  candidates.resize(std::min(wanted, candidates.size()));
  std::sort(candidates.begin(), candidates.end());
  for (const auto& [a, b] : candidates) {
    std::string addition = " It builds on";
    for (std::size_t j = 0; j < spec.topic_terms; ++j) addition += " " + topic_term(a, j);
    addition += ".";
    auto targets = fragments_of[b];
    rng.shuffle(targets);
    for (std::size_t k = 0; k < std::min<std::size_t>(2, targets.size()); ++k) {
      out.dataset.fragments[targets[k]].text += addition;
    }
    DependencyEdge e{topic_id(a), topic_id(b)};
    out.truth.planted.insert(e);
    out.dataset.dependencies.push_back({e, 1.0});
  }

  // Facet label texts.
  for (const auto& name : synthetic_facet_vocabulary()) {
    out.falts[name] = "The " + name + " facet: " + name + " concepts and " + name + " details.";
  }

  // Embeddings: facet keywords get strong vectors, template and filler words
  // weak ones; topic vocabulary is left out of vocabulary.
  Rng erng(spec.seed ^ 0x5eedULL);
  std::vector<std::pair<std::string, double>> vocab;
  for (const auto& name : synthetic_facet_vocabulary()) vocab.emplace_back(name, 1.0);
  for (const auto& w : kFiller) vocab.emplace_back(w, 0.05);
  for (const auto& w : kTemplateWords) vocab.emplace_back(w, 0.05);
  std::sort(vocab.begin(), vocab.end());
  out.embeddings = std::to_string(vocab.size()) + " " + std::to_string(spec.embedding_dim) + "\n";
  for (const auto& [word, scale] : vocab) {
    out.embeddings += word;
    for (std::size_t k = 0; k < spec.embedding_dim; ++k) append_number(out.embeddings, erng.uniform(-scale, scale));
    out.embeddings += "\n";
  }
  return out;
}

void write_synthetic_course(const SyntheticCourse& course, const fs::path& dir) {
  fs::create_directories(dir / "outlines");
  fs::create_directories(dir / "falt");
  write_text(dir / "dataset.json", course_to_json(course.dataset));
  for (const auto& [topic, doc] : course.outlines) write_text(dir / "outlines" / (topic + ".txt"), render_outline(doc));
  for (const auto& [name, text] : course.falts) write_text(dir / "falt" / (name + ".txt"), text + "\n");
  write_text(dir / "embeddings.txt", course.embeddings);

  json truth = json::object();
  json withheld = json::object();
  for (const auto& [topic, names] : course.truth.withheld) withheld[topic] = names;
  truth["withheld"] = withheld;
  json planted = json::array();
  for (const auto& [a, b] : course.truth.planted) planted.push_back({a, b});
  truth["planted"] = planted;
  write_text(dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace kforest
