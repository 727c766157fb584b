#include "kforest/metrics.hpp"

#include <cmath>

#include "kforest/error.hpp"
#include "kforest/propagate.hpp"

namespace kforest {

bool RankedPrediction::well_formed() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!seen.insert(items[i].first).second) return false;
    if (i > 0 && items[i].second > items[i - 1].second) return false;
  }
  return true;
}

double ndcg(const RankedPrediction& predicted, const std::set<std::string>& gold, std::size_t k) {
  if (gold.empty()) return 1.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < k && i < predicted.items.size(); ++i) {
    if (gold.count(predicted.items[i].first)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < k && i < gold.size(); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double macro_f(const std::vector<std::set<std::string>>& predicted, const std::vector<std::set<std::string>>& gold,
               const std::set<std::string>& universe) {
  if (predicted.size() != gold.size()) {
    throw Error(ErrorCode::ShapeMismatch, "predicted and gold label lists differ in length");
  }
  double total = 0.0;
  std::size_t active = 0;
  for (const auto& label : universe) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      bool p = predicted[i].count(label) > 0;
      bool g = gold[i].count(label) > 0;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    if (tp + fp + fn == 0) continue;
    ++active;
    double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    total += precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  if (active == 0) throw Error(ErrorCode::NoActiveLabels, "no label occurs in gold or predictions");
  return total / static_cast<double>(active);
}

double facet_ndcg(const ProbabilityTable& table, const std::map<TopicId, std::set<std::string>>& gold) {
  if (gold.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [topic, facets] : gold) {
    RankedPrediction ranked{table.ranked(topic)};
    sum += ndcg(ranked, facets, facets.size());
  }
  return sum / static_cast<double>(gold.size());
}

}  // namespace kforest
