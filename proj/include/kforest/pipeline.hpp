#pragma once

// Stage orchestration: ingest -> build-facets -> extract-deps -> assemble ->
// export -> eval, driven by one JSON configuration file.
//
// Every stage writes its artifacts into the output directory together with
// manifests/<stage>.json:
//
//   stage    stage name
//   version  manifest format version (1)
//   params   the configuration subtree the stage depends on, seeds included
//   inputs   { name: FNV-1a 64 hex digest } for every file or directory read
//   outputs  { file name: FNV-1a 64 hex digest } for every artifact written
//
// A stage whose recorded params and input digests equal the current ones, and
// whose outputs still hash as recorded, is skipped.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kforest/assemble.hpp"
#include "kforest/deps.hpp"
#include "kforest/error.hpp"
#include "kforest/metrics.hpp"
#include "kforest/propagate.hpp"

namespace kforest {

struct PipelineConfig {
  std::filesystem::path dataset;     // course JSON or N-Triples
  std::filesystem::path outlines;    // optional directory
  std::filesystem::path falt;        // optional directory
  std::filesystem::path embeddings;  // optional file
  std::filesystem::path output;

  PropagationParams propagation;

  DepsPredictParams deps_predict;
  DepsTrainParams deps_train;
  std::string deps_training = "dataset";
  std::uint32_t deps_holdout = 3;  // edges with hash % n == 0 are held out; 0 keeps all
  std::uint64_t deps_seed = 0;

  RepresentationParams representation;
  AssemblerTrainParams assembler_train;
  bool min_one = true;
  std::uint32_t assembler_holdout = 4;
  std::uint64_t triple_seed = 0;
  std::uint64_t embedding_seed = 0;

  std::vector<std::string> export_formats = {"nt", "dot", "json"};

  std::string effective;  // canonical JSON of the whole effective config

  // Parses and validates; relative paths resolve against base_dir.
  // Throws ConfigError.
  static PipelineConfig from_json(std::string_view text, const std::filesystem::path& base_dir,
                                  const std::vector<std::string>& overrides = {});
};

// Reads the file and applies "dotted.key=value" overrides. Values parse as
// JSON when they can and are taken as strings otherwise.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Checks that every configured input path exists. Throws ConfigError.
void check_paths(const PipelineConfig& config);

// Stats and Synth run on their own and are not part of the pipeline order.
enum class Stage { Ingest, BuildFacets, ExtractDeps, Assemble, Export, Eval, Stats, Synth };

const std::vector<Stage>& all_stages();
std::string_view stage_name(Stage stage);
int stage_exit_code(Stage stage);  // nonzero, distinct per stage

struct StageOutcome {
  bool skipped = false;
  std::vector<std::string> outputs;
};

// Runs one stage. On error no artifact of the stage is left behind and a
// StageError naming the stage is thrown.
StageOutcome run_stage(Stage stage, const PipelineConfig& config, std::ostream& log);

class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause);
  Stage stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  Stage stage_;
  ErrorCode cause_;
};

// Runs every stage in order and validates the final forest. Returns 0 when
// the final forest validates, otherwise the eval stage exit code.
int run_pipeline(const PipelineConfig& config, std::ostream& log);

// Prints topic/fragment/dependency counts of the configured dataset and
// writes stats.tsv unless no output directory is set.
CourseStats run_stats(const PipelineConfig& config, std::ostream& log);

// Writes a synthetic course, a ready-to-run config.json pointing at it and a
// synth manifest into dir.
void write_synthetic_bundle(const SyntheticCourseSpec& spec, const std::filesystem::path& dir, std::ostream& log);

// FNV-1a 64 digest of a file, or of a directory's sorted (relative name,
// contents) listing.
std::string content_digest(const std::filesystem::path& path);

std::string deps_model_to_json(const DependencyModel& model);

}  // namespace kforest
