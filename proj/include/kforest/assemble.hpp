#pragma once

// Knowledge fragment assembly.
//
// A text is turned into three r x m matrices: its token embeddings are
// convolved with fixed unigram, bigram and trigram filters, rectified and
// max-pooled into r row segments. A fragment and a facet label text (FaLT)
// are compared row by row with cosine similarity, giving a 3 x r x r input
// to a small trainable head:
//
//   3x3 conv (8 maps, zero padded) -> ReLU -> 2x2 max-pool -> dense -> sigmoid
//
// One head scores every (fragment, facet) pair, so labelling a fragment is a
// set of independent binary decisions over the facets of its topic.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kforest/core.hpp"
#include "kforest/ingest.hpp"

namespace kforest {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline constexpr std::array<std::size_t, 3> kNgramSizes = {1, 2, 3};

struct RepresentationParams {
  std::size_t max_tokens = 128;   // L
  std::size_t feature_maps = 64;  // m
  std::size_t pooled_rows = 16;   // r
  std::uint64_t seed = 7;

  void check() const;  // throws InvalidParams

  friend bool operator==(const RepresentationParams&, const RepresentationParams&) = default;
};

// Per n-gram size: m filters of n*d weights, row-major over (filter, offset, dim).
struct NgramFilters {
  std::size_t dim = 0;
  std::size_t maps = 0;
  std::array<std::vector<double>, 3> weights;

  static NgramFilters seeded(std::size_t dim, std::size_t maps, std::uint64_t seed);

  friend bool operator==(const NgramFilters&, const NgramFilters&) = default;
};

struct FragmentRep {
  std::array<Matrix, 3> channels;  // unigram, bigram, trigram; each r x m
};

struct SimilarityChannels {
  std::array<Matrix, 3> channels;  // each r x r
};

// L x d matrix of token embeddings, truncated or padded with the pad token.
Matrix token_matrix(const std::vector<std::string>& tokens, const EmbeddingTable& embeddings, std::size_t max_tokens);

// Valid convolution of (L x d) tokens with m filters spanning n rows:
// out(t, k) = sum_{u<n, c<d} x(t+u, c) * w[k][u][c]. No bias, no activation.
Matrix ngram_convolution(const Matrix& tokens, std::span<const double> filters, std::size_t n, std::size_t maps);

void relu_inplace(Matrix& m);

// Column-wise max over r segments of ceil(rows / r) consecutive rows;
// segments past the end are zero.
Matrix segment_max_pool(const Matrix& m, std::size_t segments);

FragmentRep represent(std::string_view text, const EmbeddingTable& embeddings, const NgramFilters& filters,
                      const RepresentationParams& params);

// Row-wise cosine similarity; zero-norm rows give 0. Throws ShapeMismatch.
SimilarityChannels similarity_channels(const FragmentRep& fragment, const FragmentRep& falt);

struct AssemblerTrainParams {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 13;

  friend bool operator==(const AssemblerTrainParams&, const AssemblerTrainParams&) = default;
};

// Trainable head over a 3 x r x r similarity input. All parameters live in
// one flat vector: conv weights [map][channel][3][3], conv biases, dense
// weights [map][pooled row][pooled col], dense bias.
class SimilarityHead {
 public:
  static constexpr std::size_t kMaps = 8;
  static constexpr std::size_t kChannels = 3;
  static constexpr std::size_t kKernel = 3;

  SimilarityHead() = default;
  explicit SimilarityHead(std::size_t rows);

  static SimilarityHead seeded(std::size_t rows, std::uint64_t seed);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t pooled() const noexcept { return (rows_ + 1) / 2; }

  std::size_t conv_weight_offset() const noexcept { return 0; }
  std::size_t conv_bias_offset() const noexcept { return kMaps * kChannels * kKernel * kKernel; }
  std::size_t dense_weight_offset() const noexcept { return conv_bias_offset() + kMaps; }
  std::size_t dense_bias_offset() const noexcept { return dense_weight_offset() + kMaps * pooled() * pooled(); }
  std::size_t parameter_count() const noexcept { return dense_bias_offset() + 1; }

  std::vector<double>& parameters() noexcept { return params_; }
  const std::vector<double>& parameters() const noexcept { return params_; }

  double logit(const SimilarityChannels& input) const;
  double forward(const SimilarityChannels& input) const;  // probability in (0, 1)

  // Binary cross-entropy of one example; accumulates d(loss)/d(params)
  // into grad (sized parameter_count()).
  double loss_and_gradient(const SimilarityChannels& input, int label, std::span<double> grad) const;

  // Zero-padded 3x3 convolution output before activation, [map][i][j].
  std::vector<double> convolve(const SimilarityChannels& input) const;

  friend bool operator==(const SimilarityHead&, const SimilarityHead&) = default;

 private:
  std::size_t rows_ = 0;
  std::vector<double> params_;
};

struct AssemblerModel {
  RepresentationParams representation;
  AssemblerTrainParams training;
  NgramFilters filters;
  SimilarityHead head;
  bool trained = false;

  // Seeds filters from representation.seed and the head from training.seed.
  static AssemblerModel create(const RepresentationParams& representation, std::size_t embedding_dim,
                               const AssemblerTrainParams& training = {});

  FragmentRep represent(std::string_view text, const EmbeddingTable& embeddings) const {
    return kforest::represent(text, embeddings, filters, representation);
  }

  double forward(const SimilarityChannels& channels) const { return head.forward(channels); }

  // Throws UntrainedModel.
  double score(std::string_view fragment, std::string_view falt, const EmbeddingTable& embeddings) const;

  friend bool operator==(const AssemblerModel&, const AssemblerModel&) = default;
};

struct AssemblyExample {
  SimilarityChannels channels;
  int label = 0;
};

// Momentum mini-batch descent on the head only, seeded shuffles. Returns the
// mean training loss of each epoch. Throws EmptyTrainingSet or NonFiniteLoss.
std::vector<double> train_head(AssemblerModel& model, const std::vector<AssemblyExample>& examples);

struct LabeledTriple {
  KnowledgeFragment fragment;
  FacetPath facet;
  int label = 0;
};

// One positive per (fragment, facet) assembly pair plus one negative facet
// drawn uniformly from the topic's other facets.
std::vector<LabeledTriple> assembly_triples(const KnowledgeForest& gold, std::uint64_t seed);

// Builds similarity inputs (FaLT looked up by the facet's leaf name) and
// trains. Returns the per-epoch loss trace.
std::vector<double> train_assembler(AssemblerModel& model, const std::vector<LabeledTriple>& triples,
                                    const FaltRepository& falts, const EmbeddingTable& embeddings);

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // parameters whose +-h probe crosses a ReLU or pooling kink
};

// Max relative error between the analytic head gradient and central finite
// differences with step h; absolute error where the magnitude is below 1e-8.
// Parameters whose probes change the rectifier or pooling routing are not
// differentiable at that scale and are counted as skipped instead.
GradCheckReport grad_check_report(const AssemblerModel& model, const SimilarityChannels& sample, int label,
                                  double h = 1e-4);
double grad_check(const AssemblerModel& model, const SimilarityChannels& sample, int label, double h = 1e-4);

// FaLT representations computed once per distinct text.
class FaltRepCache {
 public:
  const FragmentRep& get(const AssemblerModel& model, const std::string& text, const EmbeddingTable& embeddings);

 private:
  std::map<std::string, FragmentRep> reps_;
};

// Facets of the tree scored >= 0.5. With min_one and nothing selected, the
// best-scoring facet (ties: smaller path). Throws UntrainedModel or
// EmptyFacetTree.
std::set<FacetPath> assign_facets(const AssemblerModel& model, const KnowledgeFragment& fragment,
                                  const FacetTree& tree, const FaltRepository& falts,
                                  const EmbeddingTable& embeddings, bool min_one, FaltRepCache* cache = nullptr);

// Versioned JSON checkpoint holding every parameter and seed.
std::string save_checkpoint(const AssemblerModel& model);
AssemblerModel load_checkpoint(std::string_view text);  // throws SchemaError

}  // namespace kforest
