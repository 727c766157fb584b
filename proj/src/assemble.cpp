#include "kforest/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"
#include "kforest/error.hpp"
#include "kforest/kernels.hpp"
#include "kforest/text.hpp"

namespace kforest {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Binary cross-entropy from a logit, stable for large |logit|.
double bce(double logit, int label) { return softplus(logit) - label * logit; }

}  // namespace

void RepresentationParams::check() const {
  if (max_tokens < 3) throw Error(ErrorCode::InvalidParams, "max_tokens must be at least 3");
  if (pooled_rows < 1) throw Error(ErrorCode::InvalidParams, "pooled_rows must be at least 1");
  if (feature_maps < 1) throw Error(ErrorCode::InvalidParams, "feature_maps must be at least 1");
}

NgramFilters NgramFilters::seeded(std::size_t dim, std::size_t maps, std::uint64_t seed) {
  NgramFilters f;
  f.dim = dim;
  f.maps = maps;
  Rng rng(seed);
  for (std::size_t g = 0; g < kNgramSizes.size(); ++g) {
    std::size_t fan_in = kNgramSizes[g] * dim;
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + maps));
    f.weights[g].resize(maps * fan_in);
    for (auto& w : f.weights[g]) w = rng.uniform(-limit, limit);
  }
  return f;
}

Matrix token_matrix(const std::vector<std::string>& tokens, const EmbeddingTable& embeddings, std::size_t max_tokens) {
  Matrix m(max_tokens, embeddings.dim());
  for (std::size_t t = 0; t < max_tokens && t < tokens.size(); ++t) {
    auto vec = embeddings.lookup(tokens[t]);
    std::copy(vec.begin(), vec.end(), m.row(t).begin());
  }
  return m;
}

Matrix ngram_convolution(const Matrix& tokens, std::span<const double> filters, std::size_t n, std::size_t maps) {
  const std::size_t d = tokens.cols;
  const std::size_t window = n * d;
  if (tokens.rows < n || filters.size() != maps * window) {
    throw Error(ErrorCode::ShapeMismatch, "convolution window does not fit the input");
  }
  const std::size_t out_rows = tokens.rows - n + 1;
  Matrix out(out_rows, maps);
  // Rows are contiguous, so an n-row window is one span of n*d values.
  for (std::size_t t = 0; t < out_rows; ++t) {
    std::span<const double> x(tokens.data.data() + t * d, window);
    for (std::size_t k = 0; k < maps; ++k) {
      out.at(t, k) = kernels::dot(x, filters.subspan(k * window, window));
    }
  }
  return out;
}

void relu_inplace(Matrix& m) {
  for (auto& x : m.data) x = x > 0.0 ? x : 0.0;
}

Matrix segment_max_pool(const Matrix& m, std::size_t segments) {
  Matrix out(segments, m.cols);
  if (m.rows == 0) return out;
  const std::size_t span = (m.rows + segments - 1) / segments;
  for (std::size_t s = 0; s < segments; ++s) {
    std::size_t begin = s * span;
    if (begin >= m.rows) break;
    std::size_t end = std::min(begin + span, m.rows);
    auto dst = out.row(s);
    std::copy(m.row(begin).begin(), m.row(begin).end(), dst.begin());
    for (std::size_t r = begin + 1; r < end; ++r) {
      auto src = m.row(r);
      for (std::size_t c = 0; c < m.cols; ++c) dst[c] = std::max(dst[c], src[c]);
    }
  }
  return out;
}

FragmentRep represent(std::string_view text, const EmbeddingTable& embeddings, const NgramFilters& filters,
                      const RepresentationParams& params) {
  params.check();
  if (filters.dim != embeddings.dim() || filters.maps != params.feature_maps) {
    throw Error(ErrorCode::ShapeMismatch, "filters do not match the embedding table or feature map count");
  }
  Matrix tokens = token_matrix(tokenize(text), embeddings, params.max_tokens);
  FragmentRep rep;
  for (std::size_t g = 0; g < kNgramSizes.size(); ++g) {
    Matrix conv = ngram_convolution(tokens, filters.weights[g], kNgramSizes[g], params.feature_maps);
    relu_inplace(conv);
    rep.channels[g] = segment_max_pool(conv, params.pooled_rows);
  }
  return rep;
}

SimilarityChannels similarity_channels(const FragmentRep& fragment, const FragmentRep& falt) {
  SimilarityChannels out;
  for (std::size_t g = 0; g < 3; ++g) {
    const Matrix& a = fragment.channels[g];
    const Matrix& b = falt.channels[g];
    if (a.rows != b.rows || a.cols != b.cols) {
      throw Error(ErrorCode::ShapeMismatch, "fragment and FaLT representations differ in shape");
    }
    std::vector<double> norm_a(a.rows), norm_b(b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) norm_a[i] = std::sqrt(kernels::dot(a.row(i), a.row(i)));
    for (std::size_t j = 0; j < b.rows; ++j) norm_b[j] = std::sqrt(kernels::dot(b.row(j), b.row(j)));
    Matrix sim(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
      if (norm_a[i] == 0.0) continue;
      for (std::size_t j = 0; j < b.rows; ++j) {
        if (norm_b[j] == 0.0) continue;
        double c = kernels::dot(a.row(i), b.row(j)) / (norm_a[i] * norm_b[j]);
        sim.at(i, j) = std::clamp(c, -1.0, 1.0);
      }
    }
    out.channels[g] = std::move(sim);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity head

SimilarityHead::SimilarityHead(std::size_t rows) : rows_(rows) { params_.assign(parameter_count(), 0.0); }

SimilarityHead SimilarityHead::seeded(std::size_t rows, std::uint64_t seed) {
  SimilarityHead head(rows);
  Rng rng(seed);
  const double conv_limit = std::sqrt(6.0 / (kChannels * kKernel * kKernel + kMaps * kKernel * kKernel));
  for (std::size_t i = head.conv_weight_offset(); i < head.conv_bias_offset(); ++i) {
    head.params_[i] = rng.uniform(-conv_limit, conv_limit);
  }
  // Small positive conv bias keeps every unit active on an all-zero input.
  for (std::size_t i = head.conv_bias_offset(); i < head.dense_weight_offset(); ++i) head.params_[i] = 0.01;
  const double dense_limit = std::sqrt(6.0 / static_cast<double>(kMaps * head.pooled() * head.pooled() + 1));
  for (std::size_t i = head.dense_weight_offset(); i < head.dense_bias_offset(); ++i) {
    head.params_[i] = rng.uniform(-dense_limit, dense_limit);
  }
  head.params_[head.dense_bias_offset()] = 0.0;
  return head;
}

std::vector<double> SimilarityHead::convolve(const SimilarityChannels& input) const {
  const std::size_t r = rows_;
  for (const auto& ch : input.channels) {
    if (ch.rows != r || ch.cols != r) throw Error(ErrorCode::ShapeMismatch, "head input is not 3 x r x r");
  }
  std::vector<double> act(kMaps * r * r);
  const double* w = params_.data() + conv_weight_offset();
  const double* b = params_.data() + conv_bias_offset();
  for (std::size_t k = 0; k < kMaps; ++k) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        double sum = b[k];
        for (std::size_t c = 0; c < kChannels; ++c) {
          const Matrix& x = input.channels[c];
          const double* wk = w + ((k * kChannels + c) * kKernel) * kKernel;
          for (std::size_t u = 0; u < kKernel; ++u) {
            std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - 1;
            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(r)) continue;
            for (std::size_t v = 0; v < kKernel; ++v) {
              std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - 1;
              if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(r)) continue;
              sum += wk[u * kKernel + v] * x.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
            }
          }
        }
        act[(k * r + i) * r + j] = sum;
      }
    }
  }
  return act;
}

namespace {

struct HeadTrace {
  std::vector<double> pre;         // conv output before ReLU
  std::vector<double> pooled;      // [map][pi][pj]
  std::vector<std::size_t> argmax; // index into pre for each pooled cell
  double logit = 0.0;
};

HeadTrace run_head(const SimilarityHead& head, const SimilarityChannels& input) {
  HeadTrace t;
  t.pre = head.convolve(input);
  const std::size_t r = head.rows();
  const std::size_t p = head.pooled();
  const std::size_t maps = SimilarityHead::kMaps;
  t.pooled.assign(maps * p * p, 0.0);
  t.argmax.assign(maps * p * p, 0);
  for (std::size_t k = 0; k < maps; ++k) {
    for (std::size_t pi = 0; pi < p; ++pi) {
      for (std::size_t pj = 0; pj < p; ++pj) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t di = 0; di < 2; ++di) {
          std::size_t i = 2 * pi + di;
          if (i >= r) continue;
          for (std::size_t dj = 0; dj < 2; ++dj) {
            std::size_t j = 2 * pj + dj;
            if (j >= r) continue;
            std::size_t idx = (k * r + i) * r + j;
            double v = std::max(t.pre[idx], 0.0);
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        t.pooled[(k * p + pi) * p + pj] = best;
        t.argmax[(k * p + pi) * p + pj] = best_idx;
      }
    }
  }
  const auto& params = head.parameters();
  std::span<const double> dense(params.data() + head.dense_weight_offset(), t.pooled.size());
  t.logit = params[head.dense_bias_offset()] + kernels::dot(dense, t.pooled);
  return t;
}

// Which conv cell each pool window routes through and whether it is active;
// the head is smooth in its parameters while this stays fixed.
std::vector<std::size_t> activation_pattern(const SimilarityHead& head, const SimilarityChannels& input) {
  HeadTrace t = run_head(head, input);
  std::vector<std::size_t> out(t.argmax.size());
  for (std::size_t q = 0; q < t.argmax.size(); ++q) {
    out[q] = t.pre[t.argmax[q]] > 0.0 ? t.argmax[q] + 1 : 0;
  }
  return out;
}

}  // namespace

double SimilarityHead::logit(const SimilarityChannels& input) const { return run_head(*this, input).logit; }

double SimilarityHead::forward(const SimilarityChannels& input) const { return sigmoid(logit(input)); }

double SimilarityHead::loss_and_gradient(const SimilarityChannels& input, int label, std::span<double> grad) const {
  HeadTrace t = run_head(*this, input);
  const double dlogit = sigmoid(t.logit) - label;
  const std::size_t r = rows_;

  grad[dense_bias_offset()] += dlogit;
  kernels::axpy(dlogit, t.pooled, grad.subspan(dense_weight_offset(), t.pooled.size()));

  // Gradient reaches the conv output only through each pool window's argmax,
  // and only where the rectifier was active.
  std::vector<double> dpre(t.pre.size(), 0.0);
  const double* dense = params_.data() + dense_weight_offset();
  for (std::size_t q = 0; q < t.pooled.size(); ++q) {
    std::size_t idx = t.argmax[q];
    if (t.pre[idx] > 0.0) dpre[idx] += dlogit * dense[q];
  }

  double* gw = grad.data() + conv_weight_offset();
  double* gb = grad.data() + conv_bias_offset();
  for (std::size_t k = 0; k < kMaps; ++k) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        double g = dpre[(k * r + i) * r + j];
        if (g == 0.0) continue;
        gb[k] += g;
        for (std::size_t c = 0; c < kChannels; ++c) {
          const Matrix& x = input.channels[c];
          double* gk = gw + ((k * kChannels + c) * kKernel) * kKernel;
          for (std::size_t u = 0; u < kKernel; ++u) {
            std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - 1;
            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(r)) continue;
            for (std::size_t v = 0; v < kKernel; ++v) {
              std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - 1;
              if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(r)) continue;
              gk[u * kKernel + v] += g * x.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
            }
          }
        }
      }
    }
  }
  return bce(t.logit, label);
}

// ---------------------------------------------------------------------------
// Model

AssemblerModel AssemblerModel::create(const RepresentationParams& representation, std::size_t embedding_dim,
                                      const AssemblerTrainParams& training) {
  representation.check();
  if (embedding_dim == 0) throw Error(ErrorCode::InvalidParams, "embedding dimension must be positive");
  AssemblerModel model;
  model.representation = representation;
  model.training = training;
  model.filters = NgramFilters::seeded(embedding_dim, representation.feature_maps, representation.seed);
  model.head = SimilarityHead::seeded(representation.pooled_rows, training.seed);
  return model;
}

double AssemblerModel::score(std::string_view fragment, std::string_view falt, const EmbeddingTable& embeddings) const {
  if (!trained) throw Error(ErrorCode::UntrainedModel, "assembler has not been trained");
  return forward(similarity_channels(represent(fragment, embeddings), represent(falt, embeddings)));
}

std::vector<double> train_head(AssemblerModel& model, const std::vector<AssemblyExample>& examples) {
  if (examples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no assembly training examples");
  const auto& tp = model.training;
  if (tp.batch_size == 0 || tp.epochs < 1 || !(tp.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "assembler training parameters");
  }
  auto& params = model.head.parameters();
  const std::size_t np = params.size();
  std::vector<double> velocity(np, 0.0);
  std::vector<double> grad(np);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(tp.seed ^ 0xA5A5A5A5A5A5A5A5ULL);

  std::vector<double> trace;
  for (int epoch = 0; epoch < tp.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tp.batch_size) {
      std::size_t end = std::min(start + tp.batch_size, order.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = examples[order[b]];
        batch_loss += model.head.loss_and_gradient(ex.channels, ex.label, grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                                                  std::to_string(start) + ": loss is not finite");
      }
      epoch_loss += batch_loss;
      const double inv = 1.0 / static_cast<double>(end - start);
      // v = momentum * v - rate * mean_grad; params += v
      kernels::axpby(tp.momentum, grad, -tp.learning_rate * inv, velocity);
      kernels::axpy(1.0, velocity, params);
    }
    for (double p : params) {
      if (!std::isfinite(p)) throw Error(ErrorCode::NonFiniteLoss, "head parameters diverged");
    }
    trace.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  model.trained = true;
  return trace;
}

std::vector<LabeledTriple> assembly_triples(const KnowledgeForest& gold, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledTriple> out;
  for (const auto& [topic, mft] : gold.mfts) {
    std::map<std::string, std::set<FacetPath>> labels;
    for (const auto& [path, fid] : mft.assembly) labels[fid].insert(path);
    std::vector<FacetPath> all(mft.tree.facets().begin(), mft.tree.facets().end());
    for (const auto& [fid, paths] : labels) {
      auto frag = mft.fragments.find(fid);
      if (frag == mft.fragments.end()) continue;
      std::vector<FacetPath> others;
      for (const auto& p : all) {
        if (!paths.count(p)) others.push_back(p);
      }
      for (const auto& path : paths) {
        out.push_back({frag->second, path, 1});
        if (!others.empty()) out.push_back({frag->second, others[rng.below(others.size())], 0});
      }
    }
  }
  return out;
}

std::vector<double> train_assembler(AssemblerModel& model, const std::vector<LabeledTriple>& triples,
                                    const FaltRepository& falts, const EmbeddingTable& embeddings) {
  if (triples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no labelled (fragment, facet) triples");
  std::map<std::string, FragmentRep> fragment_reps;
  std::map<std::pair<TopicId, std::string>, FragmentRep> falt_reps;
  std::vector<AssemblyExample> examples;
  examples.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.facet.empty()) throw Error(ErrorCode::UnknownFacet, "triple with an empty facet path");
    auto fit = fragment_reps.find(t.fragment.id);
    if (fit == fragment_reps.end()) {
      fit = fragment_reps.emplace(t.fragment.id, model.represent(t.fragment.text, embeddings)).first;
    }
    auto key = std::make_pair(t.fragment.topic, t.facet.back());
    auto lit = falt_reps.find(key);
    if (lit == falt_reps.end()) {
      lit = falt_reps.emplace(key, model.represent(falts.lookup(key.first, key.second).text, embeddings)).first;
    }
    examples.push_back({similarity_channels(fit->second, lit->second), t.label});
  }
  return train_head(model, examples);
}

GradCheckReport grad_check_report(const AssemblerModel& model, const SimilarityChannels& sample, int label,
                                  double h) {
  SimilarityHead head = model.head;
  std::vector<double> analytic(head.parameter_count(), 0.0);
  head.loss_and_gradient(sample, label, analytic);
  const auto pattern = activation_pattern(head, sample);
  GradCheckReport report;
  auto& params = head.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    double up = bce(head.logit(sample), label);
    bool kink = activation_pattern(head, sample) != pattern;
    params[i] = saved - h;
    double down = bce(head.logit(sample), label);
    kink = kink || activation_pattern(head, sample) != pattern;
    params[i] = saved;
    if (kink) {
      ++report.skipped;
      continue;
    }
    ++report.checked;
    double numeric = (up - down) / (2.0 * h);
    double diff = std::fabs(numeric - analytic[i]);
    double denom = std::max(std::fabs(numeric), std::fabs(analytic[i]));
    report.max_error = std::max(report.max_error, denom < 1e-8 ? diff : diff / denom);
  }
  return report;
}

double grad_check(const AssemblerModel& model, const SimilarityChannels& sample, int label, double h) {
  return grad_check_report(model, sample, label, h).max_error;
}

const FragmentRep& FaltRepCache::get(const AssemblerModel& model, const std::string& text,
                                     const EmbeddingTable& embeddings) {
  auto it = reps_.find(text);
  if (it == reps_.end()) it = reps_.emplace(text, model.represent(text, embeddings)).first;
  return it->second;
}

std::set<FacetPath> assign_facets(const AssemblerModel& model, const KnowledgeFragment& fragment,
                                  const FacetTree& tree, const FaltRepository& falts,
                                  const EmbeddingTable& embeddings, bool min_one, FaltRepCache* cache) {
  if (!model.trained) throw Error(ErrorCode::UntrainedModel, "assembler has not been trained");
  if (tree.empty()) throw Error(ErrorCode::EmptyFacetTree, "topic '" + tree.topic() + "' has no facets");
  FragmentRep rep = model.represent(fragment.text, embeddings);
  std::set<FacetPath> chosen;
  const FacetPath* best = nullptr;
  double best_score = -1.0;
  for (const auto& path : tree.facets()) {
    auto falt = falts.lookup(tree.topic(), path.back());
    double p = cache ? model.forward(similarity_channels(rep, cache->get(model, falt.text, embeddings)))
                     : model.forward(similarity_channels(rep, model.represent(falt.text, embeddings)));
    if (p >= 0.5) chosen.insert(path);
    if (p > best_score) {  // set order makes the first maximum the smallest path
      best_score = p;
      best = &path;
    }
  }
  if (chosen.empty() && min_one && best) chosen.insert(*best);
  return chosen;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

}  // namespace

std::string save_checkpoint(const AssemblerModel& model) {
  using nlohmann::json;
  json j;
  j["format"] = "kforest-assembler";
  j["version"] = kCheckpointVersion;
  j["representation"] = {{"max_tokens", model.representation.max_tokens},
                         {"feature_maps", model.representation.feature_maps},
                         {"pooled_rows", model.representation.pooled_rows},
                         {"seed", model.representation.seed}};
  j["training"] = {{"learning_rate", model.training.learning_rate},
                   {"momentum", model.training.momentum},
                   {"batch_size", model.training.batch_size},
                   {"epochs", model.training.epochs},
                   {"seed", model.training.seed}};
  j["embedding_dim"] = model.filters.dim;
  j["filters"] = {model.filters.weights[0], model.filters.weights[1], model.filters.weights[2]};
  j["head_rows"] = model.head.rows();
  j["head"] = model.head.parameters();
  j["trained"] = model.trained;
  return j.dump() + "\n";
}

AssemblerModel load_checkpoint(std::string_view text) {
  using nlohmann::json;
  try {
    json j = json::parse(text);
    if (j.at("format") != "kforest-assembler") throw Error(ErrorCode::SchemaError, "not an assembler checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported checkpoint version");
    }
    AssemblerModel m;
    const auto& rep = j.at("representation");
    m.representation.max_tokens = rep.at("max_tokens").get<std::size_t>();
    m.representation.feature_maps = rep.at("feature_maps").get<std::size_t>();
    m.representation.pooled_rows = rep.at("pooled_rows").get<std::size_t>();
    m.representation.seed = rep.at("seed").get<std::uint64_t>();
    const auto& tr = j.at("training");
    m.training.learning_rate = tr.at("learning_rate").get<double>();
    m.training.momentum = tr.at("momentum").get<double>();
    m.training.batch_size = tr.at("batch_size").get<std::size_t>();
    m.training.epochs = tr.at("epochs").get<int>();
    m.training.seed = tr.at("seed").get<std::uint64_t>();
    m.filters.dim = j.at("embedding_dim").get<std::size_t>();
    m.filters.maps = m.representation.feature_maps;
    for (std::size_t g = 0; g < 3; ++g) {
      m.filters.weights[g] = j.at("filters").at(g).get<std::vector<double>>();
      if (m.filters.weights[g].size() != m.filters.maps * kNgramSizes[g] * m.filters.dim) {
        throw Error(ErrorCode::SchemaError, "filter bank " + std::to_string(g) + " has the wrong size");
      }
    }
    m.head = SimilarityHead(j.at("head_rows").get<std::size_t>());
    auto head = j.at("head").get<std::vector<double>>();
    if (head.size() != m.head.parameter_count()) throw Error(ErrorCode::SchemaError, "head has the wrong size");
    m.head.parameters() = std::move(head);
    m.trained = j.at("trained").get<bool>();
    m.representation.check();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace kforest
