#include "kforest/deps.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kforest/error.hpp"
#include "kforest/text.hpp"

namespace kforest {

Corpus::Corpus(const std::map<TopicId, std::string>& documents) {
  for (const auto& [id, text] : documents) {
    index_[id] = ids_.size();
    ids_.push_back(id);
    std::map<std::string, int> counts;
    for (auto& token : tokenize(text)) ++counts[std::move(token)];
    for (const auto& [term, _] : counts) ++df_[term];
    counts_.push_back(std::move(counts));
  }
}

const std::map<std::string, int>& Corpus::term_counts(const TopicId& topic) const {
  auto it = index_.find(topic);
  if (it == index_.end()) throw Error(ErrorCode::UnknownTopic, "no document for '" + topic + "'");
  return counts_[it->second];
}

int Corpus::document_frequency(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double Corpus::idf(const std::string& term) const {
  int df = document_frequency(term);
  if (df == 0) return 0.0;
  return std::log(static_cast<double>(ids_.size()) / static_cast<double>(df));
}

std::map<TopicId, std::string> topic_documents(const KnowledgeForest& forest) {
  std::map<TopicId, std::string> docs;
  for (const auto& [id, topic] : forest.topics) {
    std::string doc = topic.label;
    if (auto it = forest.mfts.find(id); it != forest.mfts.end()) {
      for (const auto& [fid, frag] : it->second.fragments) {
        doc += '\n';
        doc += frag.text;
      }
    }
    docs.emplace(id, std::move(doc));
  }
  return docs;
}

std::vector<std::pair<std::string, double>> core_terms(const Corpus& corpus, const TopicId& topic, std::size_t k) {
  const auto& counts = corpus.term_counts(topic);
  if (counts.empty()) throw Error(ErrorCode::EmptyDocument, "document of '" + topic + "' has no terms");
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [term, tf] : counts) ranked.emplace_back(term, tf * corpus.idf(term));
  // counts is sorted by term, so a stable sort leaves ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::optional<int> hierarchy_distance(const std::map<TopicId, Topic>& topics, const TopicId& a, const TopicId& b) {
  std::map<TopicId, int> up;  // ancestor of a -> steps from a
  int steps = 0;
  std::optional<TopicId> cur = a;
  while (cur && !up.count(*cur)) {
    up[*cur] = steps++;
    auto it = topics.find(*cur);
    if (it == topics.end()) break;
    cur = it->second.hypernym;
  }
  steps = 0;
  std::set<TopicId> seen;
  cur = b;
  while (cur && seen.insert(*cur).second) {
    if (auto hit = up.find(*cur); hit != up.end()) return hit->second + steps;
    ++steps;
    auto it = topics.find(*cur);
    if (it == topics.end()) break;
    cur = it->second.hypernym;
  }
  return std::nullopt;
}

namespace {

double coverage(const std::vector<std::pair<std::string, double>>& terms, const std::map<std::string, int>& target) {
  if (terms.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& [term, _] : terms) hit += target.count(term);
  return static_cast<double>(hit) / static_cast<double>(terms.size());
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

PairFeatures pair_features(const TopicId& a, const TopicId& b, const Corpus& corpus,
                           const std::map<TopicId, Topic>& topics, std::size_t k) {
  const auto& ca = corpus.term_counts(a);
  const auto& cb = corpus.term_counts(b);
  auto core_a = core_terms(corpus, a, k);
  auto core_b = core_terms(corpus, b, k);

  PairFeatures f;
  f.values[0] = coverage(core_a, cb);
  f.values[1] = coverage(core_b, ca);
  f.values[2] = f.values[0] - f.values[1];
  auto dist = hierarchy_distance(topics, a, b);
  f.values[3] = dist ? 1.0 / (1.0 + *dist) : 0.0;
  std::size_t common = 0;
  for (const auto& [term, _] : ca) common += cb.count(term);
  std::size_t uni = ca.size() + cb.size() - common;
  f.values[4] = uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
  return f;
}

double DependencyModel::score(const PairFeatures& features) const {
  if (!trained) throw Error(ErrorCode::UntrainedModel, "dependency model has not been trained");
  double z = bias;
  for (std::size_t j = 0; j < PairFeatures::kCount; ++j) {
    z += weights[j] * (features.values[j] - mean[j]) / spread[j];
  }
  return sigmoid(z);
}

DependencyModel train_dependency_model(const std::vector<LabeledPair>& pairs, const DepsTrainParams& params) {
  std::size_t positives = 0;
  for (const auto& p : pairs) positives += p.label == 1;
  if (positives == 0 || positives == pairs.size()) {
    throw Error(ErrorCode::DegenerateLabels, "training needs at least one positive and one negative pair");
  }
  constexpr std::size_t d = PairFeatures::kCount;
  const double n = static_cast<double>(pairs.size());

  DependencyModel model;
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.features.values[j];
    model.mean[j] = sum / n;
    double var = 0.0;
    for (const auto& p : pairs) var += (p.features.values[j] - model.mean[j]) * (p.features.values[j] - model.mean[j]);
    double sd = std::sqrt(var / n);
    model.spread[j] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<std::array<double, d>> z(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) z[i][j] = (pairs[i].features.values[j] - model.mean[j]) / model.spread[j];
  }

  auto loss_and_grad = [&](const std::array<double, d>& w, double b, std::array<double, d>& gw, double& gb) {
    gw.fill(0.0);
    gb = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * z[i][j];
      double y = pairs[i].label;
      loss += softplus(s) - y * s;
      double r = sigmoid(s) - y;
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * z[i][j];
      gb += r;
    }
    for (auto& g : gw) g /= n;
    gb /= n;
    return loss / n;
  };

  double rate = params.learning_rate;
  for (int attempt = 0; attempt < 60; ++attempt) {
    std::array<double, d> w{};
    double b = 0.0;
    std::vector<double> trace;
    bool monotone = true;
    std::array<double, d> gw{};
    double gb = 0.0;
    for (int it = 0; it < params.iterations; ++it) {
      double loss = loss_and_grad(w, b, gw, gb);
      if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "dependency training diverged");
      if (!trace.empty() && loss > trace.back() + 1e-12 * std::fabs(trace.back())) {
        monotone = false;
        break;
      }
      trace.push_back(loss);
      for (std::size_t j = 0; j < d; ++j) w[j] -= rate * gw[j];
      b -= rate * gb;
    }
    if (monotone) {
      double final_loss = loss_and_grad(w, b, gw, gb);
      if (!trace.empty() && final_loss > trace.back() + 1e-12 * std::fabs(trace.back())) {
        monotone = false;
      } else {
        trace.push_back(final_loss);
        model.weights = w;
        model.bias = b;
        model.learning_rate = rate;
        model.loss_trace = std::move(trace);
        model.trained = true;
        return model;
      }
    }
    rate *= 0.5;
  }
  throw Error(ErrorCode::NonFiniteLoss, "no learning rate gave a non-increasing loss");
}

std::map<DependencyEdge, double> break_cycles(std::map<DependencyEdge, double> edges) {
  for (;;) {
    std::set<DependencyEdge> keys;
    for (const auto& [e, _] : edges) keys.insert(e);
    auto cycle = find_cycle(keys);
    if (cycle.empty()) return edges;
    DependencyEdge weakest;
    double weakest_score = 0.0;
    bool first = true;
    for (std::size_t i = 0; i + 1 < cycle.size(); ++i) {
      DependencyEdge e{cycle[i], cycle[i + 1]};
      double s = edges.at(e);
      if (first || s < weakest_score || (s == weakest_score && e < weakest)) {
        weakest = e;
        weakest_score = s;
        first = false;
      }
    }
    edges.erase(weakest);
  }
}

std::map<DependencyEdge, double> predict_dependencies(const DependencyModel& model,
                                                      const std::map<TopicId, Topic>& topics, const Corpus& corpus,
                                                      const DepsPredictParams& params) {
  if (!model.trained) throw Error(ErrorCode::UntrainedModel, "dependency model has not been trained");
  std::vector<TopicId> ids;
  for (const auto& [id, _] : topics) {
    if (corpus.contains(id) && !corpus.term_counts(id).empty()) ids.push_back(id);
  }
  std::map<DependencyEdge, double> edges;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      auto dist = hierarchy_distance(topics, ids[i], ids[j]);
      if (!dist || *dist > params.radius) continue;
      double forward = model.score(pair_features(ids[i], ids[j], corpus, topics, params.core_terms));
      double backward = model.score(pair_features(ids[j], ids[i], corpus, topics, params.core_terms));
      if (forward == backward || std::max(forward, backward) <= 0.5) continue;
      if (forward > backward) {
        edges[{ids[i], ids[j]}] = forward;
      } else {
        edges[{ids[j], ids[i]}] = backward;
      }
    }
  }
  return break_cycles(std::move(edges));
}

std::vector<LabeledPair> training_pairs(const std::vector<DependencyEdge>& positives,
                                        const std::vector<DependencyEdge>& negatives,
                                        const std::map<TopicId, Topic>& topics, const Corpus& corpus,
                                        std::uint64_t seed, const DepsPredictParams& params) {
  std::vector<LabeledPair> out;
  std::set<DependencyEdge> pos(positives.begin(), positives.end());
  auto add = [&](const DependencyEdge& e, int label) {
    out.push_back({pair_features(e.first, e.second, corpus, topics, params.core_terms), label});
  };
  for (const auto& e : pos) add(e, 1);
  if (!negatives.empty()) {
    for (const auto& e : std::set<DependencyEdge>(negatives.begin(), negatives.end())) {
      if (!pos.count(e)) add(e, 0);
    }
    return out;
  }

  std::vector<DependencyEdge> candidates;
  std::vector<TopicId> ids;
  for (const auto& [id, _] : topics) {
    if (corpus.contains(id) && !corpus.term_counts(id).empty()) ids.push_back(id);
  }
  for (const auto& a : ids) {
    for (const auto& b : ids) {
      if (a == b || pos.count({a, b}) || pos.count({b, a})) continue;
      auto dist = hierarchy_distance(topics, a, b);
      if (dist && *dist <= params.radius) candidates.emplace_back(a, b);
    }
  }
  Rng rng(seed);
  std::set<DependencyEdge> chosen;
  for (const auto& e : pos) {
    if (!pos.count({e.second, e.first}) && chosen.insert({e.second, e.first}).second) add({e.second, e.first}, 0);
    if (candidates.empty()) continue;
    for (int tries = 0; tries < 8; ++tries) {
      const auto& c = candidates[rng.below(candidates.size())];
      if (chosen.insert(c).second) {
        add(c, 0);
        break;
      }
    }
  }
  return out;
}

}  // namespace kforest
