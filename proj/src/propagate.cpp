#include "kforest/propagate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "kforest/error.hpp"
#include "kforest/kernels.hpp"

namespace kforest {

void PropagationParams::check() const {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw Error(ErrorCode::InvalidParams, "lambda must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidParams, "epsilon must be positive");
  if (max_iters < 1) throw Error(ErrorCode::InvalidParams, "max_iters must be at least 1");
  if (!(smoothing > 0.0)) throw Error(ErrorCode::InvalidParams, "smoothing must be positive");
}

NeighborPairs neighbor_pairs(const std::map<TopicId, Topic>& topics) {
  NeighborPairs pairs;
  for (const auto& [id, topic] : topics) {
    std::set<TopicId> seen{id};
    for (auto cur = topic.hypernym; cur;) {
      auto it = topics.find(*cur);
      if (it == topics.end()) throw Error(ErrorCode::UnknownTopic, "hypernym '" + *cur + "' of '" + id + "'");
      if (!seen.insert(*cur).second) throw Error(ErrorCode::HypernymCycle, "cycle through '" + *cur + "'");
      cur = it->second.hypernym;
    }
  }
  std::map<TopicId, std::vector<TopicId>> children;
  for (const auto& [id, topic] : topics) {
    if (topic.hypernym) {
      pairs.parent_child.emplace(*topic.hypernym, id);
      children[*topic.hypernym].push_back(id);
    }
  }
  for (const auto& [parent, kids] : children) {
    for (std::size_t a = 0; a < kids.size(); ++a) {
      for (std::size_t b = a + 1; b < kids.size(); ++b) pairs.brothers.emplace(kids[a], kids[b]);
    }
  }
  return pairs;
}

double facet_similarity(const std::set<std::string>& a, const std::set<std::string>& b, double smoothing) {
  std::size_t common = 0;
  for (const auto& f : a) common += b.count(f);
  std::size_t uni = a.size() + b.size() - common;
  return (static_cast<double>(common) + smoothing) / (static_cast<double>(uni) + smoothing);
}

int iteration_bound(double lambda, double epsilon) {
  if (lambda <= 0.0) return 1;
  return static_cast<int>(std::ceil(std::log(epsilon * (1.0 - lambda)) / std::log(lambda)));
}

ProbabilityTable::ProbabilityTable(std::vector<TopicId> topics, std::vector<std::string> facets)
    : topics_(std::move(topics)), facets_(std::move(facets)), values_(topics_.size() * facets_.size(), 0.0) {}

std::size_t ProbabilityTable::topic_index(const TopicId& topic) const {
  auto it = std::lower_bound(topics_.begin(), topics_.end(), topic);
  if (it == topics_.end() || *it != topic) throw Error(ErrorCode::UnknownTopic, "no topic '" + topic + "'");
  return static_cast<std::size_t>(it - topics_.begin());
}

std::ptrdiff_t ProbabilityTable::facet_index(const std::string& facet) const {
  auto it = std::lower_bound(facets_.begin(), facets_.end(), facet);
  if (it == facets_.end() || *it != facet) return -1;
  return it - facets_.begin();
}

double ProbabilityTable::probability(const TopicId& topic, const std::string& facet) const {
  auto f = facet_index(facet);
  if (f < 0) return 0.0;
  return row(topic_index(topic))[static_cast<std::size_t>(f)];
}

std::vector<std::pair<std::string, double>> ProbabilityTable::ranked(const TopicId& topic) const {
  auto r = row(topic_index(topic));
  std::vector<std::pair<std::string, double>> out;
  out.reserve(facets_.size());
  for (std::size_t f = 0; f < facets_.size(); ++f) out.emplace_back(facets_[f], r[f]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

bool PropagationResult::is_seeded(const TopicId& topic, const std::string& facet) const {
  auto f = table.facet_index(facet);
  if (f < 0) return false;
  return seeded[table.topic_index(topic) * table.facets().size() + static_cast<std::size_t>(f)] != 0;
}

std::string PropagationResult::to_tsv() const {
  std::string out = "topic\tfacet\tprobability\tseeded\n";
  const auto nf = table.facets().size();
  for (std::size_t t = 0; t < table.topics().size(); ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, table.values()[t * nf + f]);
      out += table.topics()[t];
      out += '\t';
      out += table.facets()[f];
      out += '\t';
      out.append(buf, end);
      out += seeded[t * nf + f] ? "\t1\n" : "\t0\n";
    }
  }
  return out;
}

namespace {

struct Neighbor {
  std::size_t index;
  double weight;
};

// Donor path for an adopted facet: the strongest neighbour that lists the
// facet in its own outline, ties to the smaller topic id.
FacetPath donor_parent(const std::string& facet, const std::vector<Neighbor>& neighbors,
                       const std::vector<TopicId>& ids, const std::map<TopicId, FacetTree>& initial) {
  const Neighbor* best = nullptr;
  const FacetPath* best_path = nullptr;
  for (const auto& n : neighbors) {
    auto it = initial.find(ids[n.index]);
    if (it == initial.end()) continue;
    const FacetPath* found = nullptr;
    for (const auto& path : it->second.facets()) {
      if (path.back() == facet) {
        found = &path;
        break;  // set order: lexicographically smallest path first
      }
    }
    if (!found) continue;
    if (!best || n.weight > best->weight || (n.weight == best->weight && ids[n.index] < ids[best->index])) {
      best = &n;
      best_path = found;
    }
  }
  if (!best_path) return {};
  return FacetPath(best_path->begin(), best_path->end() - 1);
}

}  // namespace

PropagationResult propagate(const std::map<TopicId, FacetTree>& initial, const std::map<TopicId, Topic>& hierarchy,
                            const PropagationParams& params, const PropagationObserver& observer) {
  params.check();
  auto pairs = neighbor_pairs(hierarchy);

  std::vector<TopicId> ids;
  for (const auto& [id, _] : hierarchy) ids.push_back(id);
  std::map<TopicId, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;

  std::vector<std::set<std::string>> names(ids.size());
  std::set<std::string> universe;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (auto it = initial.find(ids[i]); it != initial.end()) names[i] = it->second.names();
    universe.insert(names[i].begin(), names[i].end());
  }

  PropagationResult result;
  result.table = ProbabilityTable(ids, std::vector<std::string>(universe.begin(), universe.end()));
  const std::size_t nf = result.table.facets().size();
  const std::size_t nt = ids.size();

  std::vector<double> anchor(nt * nf, 0.0);
  result.seeded.assign(nt * nf, 0);
  for (std::size_t i = 0; i < nt; ++i) {
    for (const auto& f : names[i]) {
      auto k = i * nf + static_cast<std::size_t>(result.table.facet_index(f));
      anchor[k] = 1.0;
      result.seeded[k] = 1;
    }
  }

  // Weights frozen from the initial facet sets.
  std::vector<std::vector<Neighbor>> neighbors(nt);
  auto link = [&](const TopicId& a, const TopicId& b) {
    std::size_t ia = index.at(a), ib = index.at(b);
    double w = facet_similarity(names[ia], names[ib], params.smoothing);
    neighbors[ia].push_back({ib, w});
    neighbors[ib].push_back({ia, w});
  };
  for (const auto& [a, b] : pairs.parent_child) link(a, b);
  for (const auto& [a, b] : pairs.brothers) link(a, b);
  std::vector<double> weight_sum(nt, 0.0);
  for (std::size_t i = 0; i < nt; ++i) {
    std::sort(neighbors[i].begin(), neighbors[i].end(),
              [](const Neighbor& x, const Neighbor& y) { return x.index < y.index; });
    for (const auto& n : neighbors[i]) weight_sum[i] += n.weight;
  }

  std::vector<double> current = anchor;
  std::vector<double> next(nt * nf, 0.0);
  const double lambda = params.lambda;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    for (std::size_t i = 0; i < nt; ++i) {
      std::span<double> out(next.data() + i * nf, nf);
      std::span<const double> own(anchor.data() + i * nf, nf);
      std::fill(out.begin(), out.end(), 0.0);
      if (lambda == 0.0 || neighbors[i].empty()) {
        kernels::axpy(1.0, own, out);
      } else {
        kernels::axpy(1.0 - lambda, own, out);
        for (const auto& n : neighbors[i]) {
          kernels::axpy(lambda * n.weight / weight_sum[i], std::span<const double>(current.data() + n.index * nf, nf),
                        out);
        }
      }
      for (std::size_t f = 0; f < nf; ++f) {
        double& p = out[f];
        if (!std::isfinite(p)) {
          throw Error(ErrorCode::NonFiniteProbability, ids[i] + "/" + result.table.facets()[f]);
        }
        p = result.seeded[i * nf + f] ? 1.0 : std::clamp(p, 0.0, 1.0);
      }
    }
    double change = nt * nf == 0 ? 0.0 : kernels::max_abs_diff(next, current);
    current.swap(next);
    result.iterations = iter;
    result.max_changes.push_back(change);
    if (observer) {
      result.table.values() = current;
      observer(iter, result.table);
    }
    if (change < params.epsilon) break;
  }
  result.table.values() = current;

  for (std::size_t i = 0; i < nt; ++i) {
    FacetTree tree(ids[i]);
    if (auto it = initial.find(ids[i]); it != initial.end()) {
      for (const auto& path : it->second.facets()) tree.insert_unchecked(path);
    }
    struct Adoption {
      FacetPath parent;
      std::string facet;
    };
    std::vector<Adoption> adopted;
    for (std::size_t f = 0; f < nf; ++f) {
      if (result.seeded[i * nf + f] || !(current[i * nf + f] > PropagationParams::kInclusionThreshold)) continue;
      const auto& facet = result.table.facets()[f];
      adopted.push_back({donor_parent(facet, neighbors[i], ids, initial), facet});
    }
    // Shallow donor paths first so deeper adoptions can hang off them.
    std::sort(adopted.begin(), adopted.end(), [](const Adoption& a, const Adoption& b) {
      if (a.parent.size() != b.parent.size()) return a.parent.size() < b.parent.size();
      return std::tie(a.parent, a.facet) < std::tie(b.parent, b.facet);
    });
    for (auto& a : adopted) {
      FacetPath path = tree.contains(a.parent) ? a.parent : FacetPath{};
      path.push_back(a.facet);
      tree.insert_unchecked(std::move(path));
    }
    result.trees.emplace(ids[i], std::move(tree));
  }
  return result;
}

}  // namespace kforest
