#include "kforest/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

#include "json.hpp"

#include "kforest/ingest.hpp"
#include "kforest/serialize.hpp"
#include "kforest/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace kforest {

namespace {

constexpr int kManifestVersion = 1;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

json default_config() {
  PropagationParams prop;
  DepsPredictParams dp;
  DepsTrainParams dt;
  RepresentationParams rp;
  AssemblerTrainParams at;
  return json{
      {"paths", {{"dataset", ""}, {"outlines", ""}, {"falt", ""}, {"embeddings", ""}, {"output", "out"}}},
      {"propagation",
       {{"lambda", prop.lambda}, {"epsilon", prop.epsilon}, {"max_iters", prop.max_iters},
        {"smoothing", prop.smoothing}}},
      {"deps",
       {{"core_terms", dp.core_terms},
        {"radius", dp.radius},
        {"training", "dataset"},
        {"holdout", 3},
        {"learning_rate", dt.learning_rate},
        {"iterations", dt.iterations},
        {"seed", nullptr}}},
      {"assembler",
       {{"max_tokens", rp.max_tokens},
        {"feature_maps", rp.feature_maps},
        {"pooled_rows", rp.pooled_rows},
        {"filter_seed", nullptr},
        {"learning_rate", at.learning_rate},
        {"momentum", at.momentum},
        {"batch_size", at.batch_size},
        {"epochs", at.epochs},
        {"seed", nullptr},
        {"min_one", true},
        {"holdout", 4},
        {"triple_seed", nullptr},
        {"embedding_seed", nullptr}}},
      {"export", {{"formats", {"nt", "dot", "json"}}}},
  };
}

// Overlays user onto defaults; unknown keys are rejected.
void overlay(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) config_error(where.empty() ? "config must be a JSON object" : where + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    std::string key = where.empty() ? it.key() : where + "." + it.key();
    auto slot = base.find(it.key());
    if (slot == base.end()) config_error("unknown key '" + key + "'");
    if (slot->is_object()) {
      overlay(*slot, *it, key);
    } else {
      *slot = *it;
    }
  }
}

void apply_override(json& user, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error("override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &user;
  std::size_t start = 0;
  for (;;) {
    auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("override key '" + key + "' has an empty segment");
    if (!node->is_object()) config_error("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

template <typename T>
T get_as(const json& cfg, const char* section, const char* key) {
  const json& v = cfg.at(section).at(key);
  std::string where = std::string(section) + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) config_error(where + " must be a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) config_error(where + " must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) config_error(where + " must be a number");
    return v.get<T>();
  } else {
    if (v.is_null()) config_error(where + " is required");
    if (!v.is_number_integer()) config_error(where + " must be an integer");
    if (std::is_unsigned_v<T> && v.get<long long>() < 0) config_error(where + " must be non-negative");
    return v.get<T>();
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Artifacts

class ArtifactSet {
 public:
  ArtifactSet(fs::path dir, Stage stage) : dir_(std::move(dir)), stage_(stage) {}
  ArtifactSet(const ArtifactSet&) = delete;
  ArtifactSet& operator=(const ArtifactSet&) = delete;

  ~ArtifactSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [name, content] : files_) fs::remove(temp_path(name), ec);
  }

  void add(const std::string& name, std::string content) {
    fs::path tmp = temp_path(name);
    fs::create_directories(tmp.parent_path());
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    files_.emplace_back(name, std::move(content));
  }

  // Renames every temporary into place, then writes the manifest.
  std::vector<std::string> commit(const json& params, const json& inputs) {
    json outputs = json::object();
    std::vector<std::string> names;
    for (const auto& [name, content] : files_) {
      fs::rename(temp_path(name), dir_ / name);
      outputs[name] = hex16(fnv1a64(content));
      names.push_back(name);
    }
    committed_ = true;
    json manifest = {{"stage", std::string(stage_name(stage_))},
                     {"version", kManifestVersion},
                     {"params", params},
                     {"inputs", inputs},
                     {"outputs", outputs}};
    fs::path mpath = manifest_path(dir_, stage_);
    fs::create_directories(mpath.parent_path());
    fs::path tmp = mpath;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << manifest.dump(2) << "\n";
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    fs::rename(tmp, mpath);
    return names;
  }

  static fs::path manifest_path(const fs::path& dir, Stage stage) {
    return dir / "manifests" / (std::string(stage_name(stage)) + ".json");
  }

 private:
  fs::path temp_path(const std::string& name) const { return dir_ / (name + ".tmp"); }

  fs::path dir_;
  Stage stage_;
  std::vector<std::pair<std::string, std::string>> files_;
  bool committed_ = false;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

// Previous artifacts of a failed stage would be stale; drop them.
void remove_stage_outputs(const fs::path& dir, Stage stage) {
  fs::path mpath = ArtifactSet::manifest_path(dir, stage);
  std::error_code ec;
  if (fs::exists(mpath, ec)) {
    try {
      json manifest = json::parse(read_file(mpath));
      for (auto it = manifest.at("outputs").begin(); it != manifest.at("outputs").end(); ++it) {
        fs::remove(dir / it.key(), ec);
      }
    } catch (const std::exception&) {
    }
    fs::remove(mpath, ec);
  }
}

bool up_to_date(const fs::path& dir, Stage stage, const json& params, const json& inputs, StageOutcome& outcome) {
  fs::path mpath = ArtifactSet::manifest_path(dir, stage);
  if (!fs::exists(mpath)) return false;
  json manifest = json::parse(read_file(mpath), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) return false;
  if (manifest.value("version", 0) != kManifestVersion) return false;
  if (manifest.value("params", json()) != params || manifest.value("inputs", json()) != inputs) return false;
  const json outputs = manifest.value("outputs", json::object());
  for (auto it = outputs.begin(); it != outputs.end(); ++it) {
    fs::path p = dir / it.key();
    if (!fs::is_regular_file(p) || content_digest(p) != it.value()) return false;
    outcome.outputs.push_back(it.key());
  }
  outcome.skipped = true;
  return true;
}

// ---------------------------------------------------------------------------
// Stage helpers

CourseDataset load_dataset(const fs::path& path) {
  if (path.extension() == ".nt") {
    KnowledgeForest forest = from_ntriples(read_file(path));
    CourseDataset ds = dataset_from_forest(forest, path.stem().string());
    check_integrity(ds);
    return ds;
  }
  return load_course(path);
}

KnowledgeForest load_forest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, path.string() + " not found; run the earlier stage first");
  return from_json(read_file(path));
}

std::string dataset_name(const fs::path& path) {
  try {
    json j = json::parse(read_file(path));
    if (j.is_object() && j.contains("name") && j["name"].is_string()) return j["name"].get<std::string>();
  } catch (const std::exception&) {
  }
  return {};
}

bool held_out(const DependencyEdge& e, std::uint32_t k) {
  return k > 0 && fnv1a64(e.first + "\t" + e.second) % k == 0;
}

bool held_out(const std::string& fragment_text, std::uint32_t k) { return k > 0 && fnv1a64(fragment_text) % k == 0; }

std::map<TopicId, FacetTree> trees_of(const KnowledgeForest& forest) {
  std::map<TopicId, FacetTree> out;
  for (const auto& [id, mft] : forest.mfts) {
    if (!mft.tree.empty()) out.emplace(id, mft.tree);
  }
  return out;
}

json input_digests(const std::vector<std::pair<std::string, fs::path>>& inputs) {
  json out = json::object();
  for (const auto& [name, path] : inputs) {
    if (path.empty()) continue;
    out[name] = content_digest(path);
  }
  return out;
}

json stage_params(Stage stage, const PipelineConfig& config) {
  json cfg = json::parse(config.effective);
  switch (stage) {
    case Stage::BuildFacets: return cfg.at("propagation");
    case Stage::ExtractDeps: return cfg.at("deps");
    case Stage::Assemble: return cfg.at("assembler");
    case Stage::Export: return cfg.at("export");
    case Stage::Eval: return {{"propagation", cfg.at("propagation")},
                              {"deps_holdout", cfg.at("deps").at("holdout")},
                              {"assembler_holdout", cfg.at("assembler").at("holdout")}};
    default: return json::object();
  }
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  CourseDataset ds = load_dataset(config.dataset);
  KnowledgeForest forest;
  for (const auto& t : ds.topics) forest.add_topic(t);
  if (!config.outlines.empty()) {
    for (const auto& [topic, doc] : load_outlines(config.outlines)) {
      if (!forest.topics.count(topic)) {
        throw Error(ErrorCode::UnknownTopic, "outline for unknown topic '" + topic + "'");
      }
      FacetTree tree = initial_facets(doc);
      forest.mfts[topic].tree = FacetTree(topic);
      for (const auto& p : tree.facets()) forest.mfts[topic].tree.insert_unchecked(p);
    }
  }
  for (const auto& f : ds.fragments) {
    auto frag = KnowledgeFragment::make(f.topic, f.text);
    forest.mfts[f.topic].fragments.emplace(frag.id, frag);
  }
  auto report = validate(forest);
  if (!report.ok()) throw Error(ErrorCode::IntegrityError, report.violations.front().message);
  log << "ingest: " << forest.topics.size() << " topics, " << ds.fragments.size() << " fragments\n";
  out.add("ingested.json", to_json(forest, ds.name));
}

void stage_build_facets(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  fs::path in = config.output / "ingested.json";
  KnowledgeForest forest = load_forest(in);
  auto result = propagate(trees_of(forest), forest.topics, config.propagation);
  std::size_t before = 0, after = 0;
  for (auto& [id, mft] : forest.mfts) {
    before += mft.tree.size();
    auto it = result.trees.find(id);
    if (it != result.trees.end()) mft.tree = it->second;
    after += mft.tree.size();
  }
  log << "build-facets: " << result.iterations << " iterations, " << before << " -> " << after << " facets\n";
  out.add("facets.json", to_json(forest, dataset_name(in)));
  out.add("probabilities.tsv", result.to_tsv());
}

void stage_extract_deps(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  fs::path in = config.output / "facets.json";
  KnowledgeForest forest = load_forest(in);
  CourseDataset ds = load_dataset(config.dataset);
  std::vector<DependencyEdge> positives;
  for (const auto& [edge, score] : ds.dependencies) {
    if (!held_out(edge, config.deps_holdout)) positives.push_back(edge);
  }
  Corpus corpus(topic_documents(forest));
  auto pairs = training_pairs(positives, ds.negative_dependencies, forest.topics, corpus, config.deps_seed,
                              config.deps_predict);
  DependencyModel model = train_dependency_model(pairs, config.deps_train);
  forest.dependencies = predict_dependencies(model, forest.topics, corpus, config.deps_predict);
  std::string tsv = "from\tto\tscore\n";
  for (const auto& [edge, score] : forest.dependencies) {
    tsv += edge.first + "\t" + edge.second + "\t" + format_double(score) + "\n";
  }
  log << "extract-deps: " << positives.size() << " training edges, " << forest.dependencies.size()
      << " predicted\n";
  out.add("deps.json", to_json(forest, dataset_name(in)));
  out.add("edges.tsv", tsv);
  out.add("deps_model.json", deps_model_to_json(model));
}

void stage_assemble(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  fs::path in = config.output / "deps.json";
  KnowledgeForest forest = load_forest(in);
  CourseDataset ds = load_dataset(config.dataset);
  if (config.embeddings.empty()) config_error("paths.embeddings is required by assemble");
  EmbeddingTable embeddings = load_embeddings(config.embeddings, config.embedding_seed);
  FaltRepository falts = config.falt.empty() ? FaltRepository{} : load_falt(config.falt);
  for (const auto& w : falts.warnings()) log << "assemble: warning: " << w << "\n";

  CourseDataset train_ds = ds;
  train_ds.fragments.clear();
  for (const auto& f : ds.fragments) {
    if (!held_out(f.text, config.assembler_holdout)) train_ds.fragments.push_back(f);
  }
  KnowledgeForest gold = forest_from_dataset(train_ds);
  auto triples = assembly_triples(gold, config.triple_seed);
  AssemblerModel model = AssemblerModel::create(config.representation, embeddings.dim(), config.assembler_train);
  auto trace = train_assembler(model, triples, falts, embeddings);

  FaltRepCache cache;
  std::size_t assigned = 0;
  for (auto& [id, mft] : forest.mfts) {
    mft.assembly.clear();
    if (mft.tree.empty()) continue;
    for (const auto& [fid, frag] : mft.fragments) {
      for (const auto& path : assign_facets(model, frag, mft.tree, falts, embeddings, config.min_one, &cache)) {
        mft.assembly.emplace(path, fid);
        ++assigned;
      }
    }
  }
  log << "assemble: " << triples.size() << " training triples, final loss " << format_double(trace.back())
      << ", " << assigned << " assignments\n";
  out.add("forest.json", to_json(forest, dataset_name(in)));
  out.add("assembler.json", save_checkpoint(model));
}

void stage_export(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  fs::path in = config.output / "forest.json";
  KnowledgeForest forest = load_forest(in);
  for (const auto& format : config.export_formats) {
    if (format == "nt") {
      out.add("forest.nt", to_ntriples(forest));
    } else if (format == "dot") {
      out.add("overview.dot", to_dot(forest, DotView::Overview));
      std::string trees;
      for (const auto& [id, mft] : forest.mfts) {
        if (!mft.tree.empty()) trees += to_dot(forest, DotView::FacetTree, id);
      }
      out.add("facets.dot", trees);
    } else if (format == "json") {
      out.add("export.json", to_json(forest, dataset_name(in)));
    } else {
      config_error("unknown export format '" + format + "'");
    }
  }
  log << "export: " << config.export_formats.size() << " formats\n";
}

void stage_eval(const PipelineConfig& config, ArtifactSet& out, std::ostream& log) {
  KnowledgeForest initial = load_forest(config.output / "ingested.json");
  KnowledgeForest forest = load_forest(config.output / "forest.json");
  CourseDataset ds = load_dataset(config.dataset);
  KnowledgeForest gold = forest_from_dataset(ds);

  std::vector<std::tuple<std::string, std::string, double>> rows;

  // Facet trees.
  auto prop = propagate(trees_of(initial), initial.topics, config.propagation);
  std::map<TopicId, std::set<std::string>> gold_names;
  std::set<std::pair<TopicId, std::string>> built, truth, adopted, withheld;
  for (const auto& [id, mft] : gold.mfts) {
    if (mft.tree.empty()) continue;
    gold_names[id] = mft.tree.names();
    auto init = initial.mfts.at(id).tree.names();
    for (const auto& n : mft.tree.names()) {
      truth.emplace(id, n);
      if (!init.count(n)) withheld.emplace(id, n);
    }
  }
  for (const auto& [id, mft] : forest.mfts) {
    auto init = initial.mfts.at(id).tree.names();
    for (const auto& n : mft.tree.names()) {
      built.emplace(id, n);
      if (!init.count(n)) adopted.emplace(id, n);
    }
  }
  if (!gold_names.empty()) {
    rows.emplace_back("facet_ndcg", "topic_mean", facet_ndcg(prop.table, gold_names));
    Prf f = prf(built, truth);
    rows.emplace_back("facet_precision", "all", f.precision);
    rows.emplace_back("facet_recall", "all", f.recall);
    rows.emplace_back("facet_f1", "all", f.f1);
    Prf r = prf(adopted, withheld);
    rows.emplace_back("facet_precision", "adopted", r.precision);
    rows.emplace_back("facet_recall", "adopted", r.recall);
    rows.emplace_back("facet_f1", "adopted", r.f1);
  }

  // Dependencies.
  std::set<DependencyEdge> predicted = edge_set(forest), gold_edges = edge_set(gold);
  std::set<DependencyEdge> trained, predicted_heldout, gold_heldout;
  for (const auto& e : gold_edges) {
    if (held_out(e, config.deps_holdout)) {
      gold_heldout.insert(e);
    } else {
      trained.insert(e);
    }
  }
  for (const auto& e : predicted) {
    if (!trained.count(e)) predicted_heldout.insert(e);
  }
  Prf d = prf(predicted, gold_edges);
  rows.emplace_back("dependency_precision", "all", d.precision);
  rows.emplace_back("dependency_recall", "all", d.recall);
  rows.emplace_back("dependency_f1", "all", d.f1);
  if (config.deps_holdout > 0) {
    Prf h = prf(predicted_heldout, gold_heldout);
    rows.emplace_back("dependency_precision", "heldout", h.precision);
    rows.emplace_back("dependency_recall", "heldout", h.recall);
    rows.emplace_back("dependency_f1", "heldout", h.f1);
  }

  // Assembly.
  std::vector<std::set<std::string>> pred_all, gold_all, pred_held, gold_held;
  std::set<std::string> universe;
  for (const auto& [id, gmft] : gold.mfts) {
    std::map<std::string, std::set<std::string>> gl, pl;
    for (const auto& [path, fid] : gmft.assembly) gl[fid].insert(format_path(path));
    for (const auto& [path, fid] : forest.mfts.at(id).assembly) pl[fid].insert(format_path(path));
    for (const auto& [fid, frag] : gmft.fragments) {
      if (!gl.count(fid)) continue;
      universe.insert(gl[fid].begin(), gl[fid].end());
      universe.insert(pl[fid].begin(), pl[fid].end());
      pred_all.push_back(pl[fid]);
      gold_all.push_back(gl[fid]);
      if (held_out(frag.text, config.assembler_holdout)) {
        pred_held.push_back(pl[fid]);
        gold_held.push_back(gl[fid]);
      }
    }
  }
  if (!gold_all.empty()) rows.emplace_back("assembly_macro_f", "all", macro_f(pred_all, gold_all, universe));
  if (!gold_held.empty()) rows.emplace_back("assembly_macro_f", "heldout", macro_f(pred_held, gold_held, universe));

  std::string tsv = "metric\tscope\tvalue\n";
  for (const auto& [metric, scope, value] : rows) {
    tsv += metric + "\t" + scope + "\t" + format_double(value) + "\n";
    log << "eval: " << metric << " " << scope << " " << format_double(value) << "\n";
  }
  out.add("metrics.tsv", tsv);
}

std::vector<std::pair<std::string, fs::path>> stage_inputs(Stage stage, const PipelineConfig& config) {
  const fs::path& o = config.output;
  switch (stage) {
    case Stage::Ingest: return {{"dataset", config.dataset}, {"outlines", config.outlines}};
    case Stage::BuildFacets: return {{"ingested.json", o / "ingested.json"}};
    case Stage::ExtractDeps: return {{"facets.json", o / "facets.json"}, {"dataset", config.dataset}};
    case Stage::Assemble:
      return {{"deps.json", o / "deps.json"},
              {"dataset", config.dataset},
              {"falt", config.falt},
              {"embeddings", config.embeddings}};
    case Stage::Export: return {{"forest.json", o / "forest.json"}};
    case Stage::Eval:
      return {{"ingested.json", o / "ingested.json"}, {"forest.json", o / "forest.json"}, {"dataset", config.dataset}};
    case Stage::Stats: return {{"dataset", config.dataset}};
    case Stage::Synth: return {};
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::from_json(std::string_view text, const fs::path& base_dir,
                                         const std::vector<std::string>& overrides) {
  json user = json::parse(text, nullptr, false);
  if (user.is_discarded()) config_error("config is not valid JSON");
  if (!user.is_object()) config_error("config must be a JSON object");
  for (const auto& o : overrides) apply_override(user, o);
  json cfg = default_config();
  overlay(cfg, user, "");

  PipelineConfig c;
  c.dataset = resolve(base_dir, get_as<std::string>(cfg, "paths", "dataset"));
  c.outlines = resolve(base_dir, get_as<std::string>(cfg, "paths", "outlines"));
  c.falt = resolve(base_dir, get_as<std::string>(cfg, "paths", "falt"));
  c.embeddings = resolve(base_dir, get_as<std::string>(cfg, "paths", "embeddings"));
  c.output = resolve(base_dir, get_as<std::string>(cfg, "paths", "output"));
  if (c.dataset.empty()) config_error("paths.dataset is required");
  if (c.output.empty()) config_error("paths.output is required");

  c.propagation.lambda = get_as<double>(cfg, "propagation", "lambda");
  c.propagation.epsilon = get_as<double>(cfg, "propagation", "epsilon");
  c.propagation.max_iters = get_as<int>(cfg, "propagation", "max_iters");
  c.propagation.smoothing = get_as<double>(cfg, "propagation", "smoothing");
  try {
    c.propagation.check();
  } catch (const Error& e) {
    config_error(std::string("propagation: ") + e.what());
  }

  c.deps_predict.core_terms = get_as<std::size_t>(cfg, "deps", "core_terms");
  c.deps_predict.radius = get_as<int>(cfg, "deps", "radius");
  c.deps_training = get_as<std::string>(cfg, "deps", "training");
  if (c.deps_training != "dataset") config_error("deps.training must be \"dataset\"");
  c.deps_holdout = get_as<std::uint32_t>(cfg, "deps", "holdout");
  c.deps_train.learning_rate = get_as<double>(cfg, "deps", "learning_rate");
  c.deps_train.iterations = get_as<int>(cfg, "deps", "iterations");
  c.deps_seed = get_as<std::uint64_t>(cfg, "deps", "seed");
  if (c.deps_predict.core_terms == 0) config_error("deps.core_terms must be positive");
  if (c.deps_predict.radius < 1) config_error("deps.radius must be at least 1");
  if (!(c.deps_train.learning_rate > 0.0)) config_error("deps.learning_rate must be positive");
  if (c.deps_train.iterations < 1) config_error("deps.iterations must be positive");

  c.representation.max_tokens = get_as<std::size_t>(cfg, "assembler", "max_tokens");
  c.representation.feature_maps = get_as<std::size_t>(cfg, "assembler", "feature_maps");
  c.representation.pooled_rows = get_as<std::size_t>(cfg, "assembler", "pooled_rows");
  c.representation.seed = get_as<std::uint64_t>(cfg, "assembler", "filter_seed");
  try {
    c.representation.check();
  } catch (const Error& e) {
    config_error(std::string("assembler: ") + e.what());
  }
  c.assembler_train.learning_rate = get_as<double>(cfg, "assembler", "learning_rate");
  c.assembler_train.momentum = get_as<double>(cfg, "assembler", "momentum");
  c.assembler_train.batch_size = get_as<std::size_t>(cfg, "assembler", "batch_size");
  c.assembler_train.epochs = get_as<int>(cfg, "assembler", "epochs");
  c.assembler_train.seed = get_as<std::uint64_t>(cfg, "assembler", "seed");
  if (!(c.assembler_train.learning_rate > 0.0)) config_error("assembler.learning_rate must be positive");
  if (!(c.assembler_train.momentum >= 0.0 && c.assembler_train.momentum < 1.0)) {
    config_error("assembler.momentum must be in [0, 1)");
  }
  if (c.assembler_train.batch_size == 0) config_error("assembler.batch_size must be positive");
  if (c.assembler_train.epochs < 1) config_error("assembler.epochs must be positive");
  c.min_one = get_as<bool>(cfg, "assembler", "min_one");
  c.assembler_holdout = get_as<std::uint32_t>(cfg, "assembler", "holdout");
  c.triple_seed = get_as<std::uint64_t>(cfg, "assembler", "triple_seed");
  c.embedding_seed = get_as<std::uint64_t>(cfg, "assembler", "embedding_seed");

  const json& formats = cfg.at("export").at("formats");
  if (!formats.is_array()) config_error("export.formats must be an array");
  c.export_formats.clear();
  for (const auto& f : formats) {
    if (!f.is_string()) config_error("export.formats entries must be strings");
    std::string s = f.get<std::string>();
    if (s != "nt" && s != "dot" && s != "json") config_error("unknown export format '" + s + "'");
    c.export_formats.push_back(s);
  }

  json effective = cfg;
  effective["paths"].erase("output");
  c.effective = effective.dump();
  return c;
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::is_regular_file(path)) config_error("config file " + path.string() + " not found");
  return PipelineConfig::from_json(read_file(path), path.parent_path(), overrides);
}

void check_paths(const PipelineConfig& config) {
  auto need = [](const fs::path& p, const char* what) {
    if (!p.empty() && !fs::exists(p)) config_error(std::string(what) + " " + p.string() + " does not exist");
  };
  need(config.dataset, "paths.dataset");
  need(config.outlines, "paths.outlines");
  need(config.falt, "paths.falt");
  need(config.embeddings, "paths.embeddings");
}

// ---------------------------------------------------------------------------
// Stages

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::Ingest,   Stage::BuildFacets, Stage::ExtractDeps,
                                            Stage::Assemble, Stage::Export,      Stage::Eval};
  return stages;
}

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::BuildFacets: return "build-facets";
    case Stage::ExtractDeps: return "extract-deps";
    case Stage::Assemble: return "assemble";
    case Stage::Export: return "export";
    case Stage::Eval: return "eval";
    case Stage::Stats: return "stats";
    case Stage::Synth: return "synth";
  }
  return "unknown";
}

int stage_exit_code(Stage stage) { return 10 + static_cast<int>(stage); }

StageError::StageError(Stage stage, const Error& cause)
    : Error(cause.code(), std::string(stage_name(stage)) + " failed: " + cause.what()),
      stage_(stage),
      cause_(cause.code()) {}

StageOutcome run_stage(Stage stage, const PipelineConfig& config, std::ostream& log) {
  StageOutcome outcome;
  try {
    if (stage == Stage::Stats || stage == Stage::Synth) {
      throw Error(ErrorCode::ConfigError, "not a pipeline stage");
    }
    check_paths(config);
    fs::create_directories(config.output);
    json params = stage_params(stage, config);
    json inputs = input_digests(stage_inputs(stage, config));
    if (up_to_date(config.output, stage, params, inputs, outcome)) {
      log << stage_name(stage) << ": up to date\n";
      return outcome;
    }
    ArtifactSet out(config.output, stage);
    switch (stage) {
      case Stage::Ingest: stage_ingest(config, out, log); break;
      case Stage::BuildFacets: stage_build_facets(config, out, log); break;
      case Stage::ExtractDeps: stage_extract_deps(config, out, log); break;
      case Stage::Assemble: stage_assemble(config, out, log); break;
      case Stage::Export: stage_export(config, out, log); break;
      case Stage::Eval: stage_eval(config, out, log); break;
      default: break;
    }
    outcome.outputs = out.commit(params, inputs);
    return outcome;
  } catch (const Error& e) {
    remove_stage_outputs(config.output, stage);
    throw StageError(stage, e);
  } catch (const fs::filesystem_error& e) {
    remove_stage_outputs(config.output, stage);
    throw StageError(stage, Error(ErrorCode::IoError, e.what()));
  }
}

int run_pipeline(const PipelineConfig& config, std::ostream& log) {
  for (Stage stage : all_stages()) run_stage(stage, config, log);
  KnowledgeForest forest = load_forest(config.output / "forest.json");
  auto report = validate(forest);
  for (const auto& v : report.violations) log << "validate: " << to_string(v.code) << ": " << v.message << "\n";
  return report.ok() ? 0 : stage_exit_code(Stage::Eval);
}

CourseStats run_stats(const PipelineConfig& config, std::ostream& log) {
  try {
    check_paths(config);
    CourseDataset ds = load_dataset(config.dataset);
    CourseStats s = stats(ds);
    log << "topics\t" << s.topics << "\nfragments\t" << s.fragments << "\ndependencies\t" << s.dependencies << "\n";
    if (config.output.empty()) return s;
    fs::create_directories(config.output);
    ArtifactSet out(config.output, Stage::Stats);
    out.add("stats.tsv", "topics\t" + std::to_string(s.topics) + "\nfragments\t" + std::to_string(s.fragments) +
                             "\ndependencies\t" + std::to_string(s.dependencies) + "\n");
    out.commit(json::object(), input_digests(stage_inputs(Stage::Stats, config)));
    return s;
  } catch (const Error& e) {
    throw StageError(Stage::Stats, e);
  } catch (const fs::filesystem_error& e) {
    throw StageError(Stage::Stats, Error(ErrorCode::IoError, e.what()));
  }
}

void write_synthetic_bundle(const SyntheticCourseSpec& spec, const fs::path& dir, std::ostream& log) {
  try {
    SyntheticCourse course = synth_course(spec);
    write_synthetic_course(course, dir);
    json config = {
        {"paths",
         {{"dataset", "dataset.json"},
          {"outlines", "outlines"},
          {"falt", "falt"},
          {"embeddings", "embeddings.txt"},
          {"output", "run"}}},
        {"deps", {{"seed", spec.seed + 1}}},
        {"assembler",
         {{"filter_seed", 7}, {"seed", 13}, {"triple_seed", spec.seed + 2}, {"embedding_seed", spec.seed + 3}}},
    };
    write_file(dir / "config.json", config.dump(2) + "\n");
    json params = {{"seed", spec.seed},
                   {"topics", spec.topics},
                   {"max_children", spec.max_children},
                   {"root_categories", spec.root_categories},
                   {"drop_probability", spec.drop_probability},
                   {"extra_probability", spec.extra_probability},
                   {"hide_probability", spec.hide_probability},
                   {"fragments_per_facet", spec.fragments_per_facet},
                   {"topic_terms", spec.topic_terms},
                   {"dependency_density", spec.dependency_density},
                   {"dependency_radius", spec.dependency_radius},
                   {"embedding_dim", spec.embedding_dim}};
    json outputs = json::object();
    for (const char* name : {"dataset.json", "truth.json", "embeddings.txt", "config.json", "outlines", "falt"}) {
      outputs[name] = content_digest(dir / name);
    }
    json manifest = {{"stage", "synth"},
                     {"version", kManifestVersion},
                     {"params", params},
                     {"inputs", json::object()},
                     {"outputs", outputs}};
    fs::create_directories(dir / "manifests");
    write_file(dir / "manifests" / "synth.json", manifest.dump(2) + "\n");
    log << "synth: " << course.dataset.topics.size() << " topics, " << course.dataset.fragments.size()
        << " fragments, " << course.dataset.dependencies.size() << " dependencies\n";
  } catch (const Error& e) {
    throw StageError(Stage::Synth, e);
  } catch (const fs::filesystem_error& e) {
    throw StageError(Stage::Synth, Error(ErrorCode::IoError, e.what()));
  }
}

std::string content_digest(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) {
      listing += fs::relative(f, path).generic_string();
      listing.push_back('\0');
      listing += hex16(fnv1a64(read_file(f)));
      listing.push_back('\n');
    }
    return hex16(fnv1a64(listing));
  }
  return hex16(fnv1a64(read_file(path)));
}

std::string deps_model_to_json(const DependencyModel& model) {
  json j = {{"format", "kforest-deps"},
            {"version", 1},
            {"weights", model.weights},
            {"bias", model.bias},
            {"mean", model.mean},
            {"spread", model.spread},
            {"learning_rate", model.learning_rate},
            {"final_loss", model.loss_trace.empty() ? 0.0 : model.loss_trace.back()}};
  return j.dump(2) + "\n";
}

}  // namespace kforest
