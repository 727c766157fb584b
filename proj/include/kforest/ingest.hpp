#pragma once

// Loaders for everything the construction pipeline reads from disk: topic
// outlines, annotated course datasets, facet label texts and embeddings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kforest/core.hpp"

namespace kforest {

struct OutlineEntry {
  std::string heading;
  int depth = 1;

  friend bool operator==(const OutlineEntry&, const OutlineEntry&) = default;
};

struct OutlineDocument {
  TopicId topic;
  std::vector<OutlineEntry> entries;

  friend bool operator==(const OutlineDocument&, const OutlineDocument&) = default;
};

// Accepts MediaWiki headings ("== X ==", depth = '=' count - 1; non-heading
// lines are body text and ignored) or indented plain text (one heading per
// line, depth = leading tabs + 1). The format is MediaWiki when any line
// starts with '='. Headings are normalized and stop sections are dropped
// together with their subsections. Throws MalformedOutline.
OutlineDocument parse_outline(std::string_view text, TopicId topic = {});

// Renders the indented plain-text form; parse_outline inverts it.
std::string render_outline(const OutlineDocument& doc);

bool is_stop_section(std::string_view normalized_heading);

// Throws EmptyAfterNormalization.
std::string normalize_facet_name(std::string_view raw);

FacetTree initial_facets(const OutlineDocument& doc);

// Reads <dir>/<topic>.txt and <dir>/<topic>.wiki files. Missing dir -> IoError.
std::map<TopicId, OutlineDocument> load_outlines(const std::filesystem::path& dir);

struct DatasetFragment {
  TopicId topic;
  std::string text;
  std::vector<FacetPath> facets;
};

struct CourseDataset {
  std::string name;
  std::vector<Topic> topics;
  std::vector<DatasetFragment> fragments;
  std::map<TopicId, FacetTree> facet_trees;
  std::vector<std::pair<DependencyEdge, double>> dependencies;
  std::vector<DependencyEdge> negative_dependencies;
};

struct CourseStats {
  std::size_t topics = 0;
  std::size_t fragments = 0;
  std::size_t dependencies = 0;

  friend bool operator==(const CourseStats&, const CourseStats&) = default;
};

// Parses the JSON course schema. An empty document (or "{}") is an empty
// course. Throws SchemaError (with a JSON-pointer location) or IntegrityError.
CourseDataset parse_course(std::string_view json_text);
CourseDataset load_course(const std::filesystem::path& path);
std::string course_to_json(const CourseDataset& ds);

CourseStats stats(const CourseDataset& ds);

// Referential integrity. Throws IntegrityError on the first problem found.
void check_integrity(const CourseDataset& ds);

// Gold forest: dataset facet trees, fragments assembled to their labels.
KnowledgeForest forest_from_dataset(const CourseDataset& ds);
CourseDataset dataset_from_forest(const KnowledgeForest& forest, std::string name = {});

inline constexpr std::string_view kPadToken = "<pad>";

class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  // Throws DimensionMismatch on wrong length or non-finite components.
  void insert(std::string token, std::vector<double> vec);

  bool contains(std::string_view token) const { return vectors_.find(token) != vectors_.end(); }

  // Stored vector, zero for the padding token, otherwise a pseudo-random
  // vector in [-0.1, 0.1] that depends only on (token, seed).
  std::vector<double> lookup(std::string_view token) const;

  const std::map<std::string, std::vector<double>, std::less<>>& vectors() const noexcept { return vectors_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
};

// Optional "count dim" header line, then "token c1 c2 ... cd" rows.
// Throws DimensionMismatch or EmptyTable.
EmbeddingTable parse_embeddings(std::string_view text, std::uint64_t seed = 0);
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::uint64_t seed = 0);

struct FaltText {
  std::string text;
  bool fallback = false;  // true when the facet name stands in for a missing FaLT
};

class FaltRepository {
 public:
  // Keyed by normalized facet name.
  void insert(const std::string& facet, std::string text);
  void insert_for_topic(const TopicId& topic, const std::string& facet, std::string text);

  // Topic-specific text first, then the shared one, then the name itself.
  FaltText lookup(const TopicId& topic, const std::string& facet) const;

  std::size_t size() const noexcept { return shared_.size() + per_topic_.size(); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

 private:
  std::map<std::string, std::string> shared_;
  std::map<std::pair<TopicId, std::string>, std::string> per_topic_;
  std::vector<std::string> warnings_;
};

// <dir>/<facet>.txt plus <dir>/<topic>/<facet>.txt overrides. Throws
// EmptyRepository if dir does not exist. Empty files are skipped with a
// warning.
FaltRepository load_falt(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace kforest
