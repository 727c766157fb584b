// kforest command line: one subcommand per pipeline stage plus stats, synth
// and pipeline. Configuration comes only from --config and --set.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "kforest/error.hpp"
#include "kforest/metrics.hpp"
#include "kforest/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kforest;

namespace {

constexpr int kConfigExit = 2;

std::string quoted_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += "\"" + items[i] + "\"";
  }
  return out + "]";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kforest: build knowledge forests from course material"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("--set", overrides, "Override a config leaf, e.g. --set propagation.lambda=0.5")
      ->allow_extra_args(false);

  auto* ingest = app.add_subcommand("ingest", "Load the dataset and outlines into ingested.json");
  std::string ingest_input;
  ingest->add_option("--input", ingest_input, "Dataset (.json or .nt), overrides paths.dataset");
  auto* build = app.add_subcommand("build-facets", "Propagate facets into facets.json");
  auto* deps = app.add_subcommand("extract-deps", "Train and predict learning dependencies");
  auto* assemble = app.add_subcommand("assemble", "Train the assembler and attach fragments to facets");
  auto* exporter = app.add_subcommand("export", "Write N-Triples, DOT and JSON views of forest.json");
  std::vector<std::string> formats;
  exporter->add_option("--format", formats, "nt, dot or json (repeatable)")
      ->check(CLI::IsMember({"nt", "dot", "json"}));
  auto* eval = app.add_subcommand("eval", "Score the forest against the dataset into metrics.tsv");
  auto* stats = app.add_subcommand("stats", "Print topic, fragment and dependency counts");
  std::string stats_input;
  stats->add_option("--input", stats_input, "Dataset (.json or .nt); without it the config is used");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic course with a runnable config");
  SyntheticCourseSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--topics", spec.topics, "Number of topics")->capture_default_str();
  synth->add_option("--hide", spec.hide_probability, "Probability of withholding a true facet")
      ->capture_default_str();
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      write_synthetic_bundle(spec, synth_out, std::cout);
      return 0;
    }
    if (stats->parsed() && !stats_input.empty()) {
      PipelineConfig config;
      config.dataset = stats_input;
      run_stats(config, std::cout);
      return 0;
    }
    if (config_path.empty()) {
      std::cerr << "error: --config is required for this command\n";
      return kConfigExit;
    }
    if (ingest->parsed() && !ingest_input.empty()) {
      overrides.push_back("paths.dataset=" + fs::absolute(ingest_input).string());
    }
    if (exporter->parsed() && !formats.empty()) overrides.push_back("export.formats=" + quoted_list(formats));
    PipelineConfig config = load_config(config_path, overrides);

    if (stats->parsed()) {
      run_stats(config, std::cout);
      return 0;
    }
    if (pipeline->parsed()) return run_pipeline(config, std::cout);

    Stage stage = ingest->parsed()     ? Stage::Ingest
                  : build->parsed()    ? Stage::BuildFacets
                  : deps->parsed()     ? Stage::ExtractDeps
                  : assemble->parsed() ? Stage::Assemble
                  : exporter->parsed() ? Stage::Export
                                       : Stage::Eval;
    (void)eval;
    run_stage(stage, config, std::cout);
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error[" << stage_name(e.stage()) << "]: " << e.what() << "\n";
    return e.cause() == ErrorCode::ConfigError ? kConfigExit : stage_exit_code(e.stage());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kConfigExit : 1;
  }
}
