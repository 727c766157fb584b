#include "kforest/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kforest/error.hpp"
#include "kforest/text.hpp"

namespace kforest {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

bool is_name_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Strips one "3.1 " / "2. " style numbering prefix; returns false if absent.
bool strip_numbering(std::string_view& s) {
  std::size_t i = 0;
  if (i >= s.size() || !is_digit(s[i])) return false;
  while (i < s.size() && is_digit(s[i])) ++i;
  while (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i;
  }
  if (i < s.size() && s[i] == '.') ++i;
  if (i >= s.size() || !is_blank(s[i])) return false;
  while (i < s.size() && is_blank(s[i])) ++i;
  s.remove_prefix(i);
  return true;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_blank(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_blank(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string normalized_heading(std::string_view raw, std::size_t line_no) {
  try {
    return normalize_facet_name(raw);
  } catch (const Error&) {
    throw Error(ErrorCode::MalformedOutline, "line " + std::to_string(line_no) + ": heading normalizes to nothing");
  }
}

}  // namespace

std::string normalize_facet_name(std::string_view raw) {
  std::string lowered;
  int paren = 0;
  for (char ch : raw) {
    if (ch == '(') {
      ++paren;
      continue;
    }
    if (ch == ')' && paren > 0) {
      --paren;
      continue;
    }
    if (paren > 0) continue;
    lowered.push_back((ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch);
  }

  std::string_view rest = trim(lowered);
  while (strip_numbering(rest)) {
  }

  std::string out;
  bool pending = false;
  for (char ch : rest) {
    if (is_name_byte(static_cast<unsigned char>(ch))) {
      if (pending && !out.empty()) out.push_back('-');
      pending = false;
      out.push_back(ch);
    } else {
      pending = true;
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyAfterNormalization, "'" + std::string(raw) + "'");
  return out;
}

bool is_stop_section(std::string_view name) {
  static constexpr std::array<std::string_view, 6> stops = {
      "references", "external-links", "see-also", "notes", "further-reading", "bibliography"};
  return std::find(stops.begin(), stops.end(), name) != stops.end();
}

OutlineDocument parse_outline(std::string_view text, TopicId topic) {
  auto lines = split_lines(text);
  bool wiki = std::any_of(lines.begin(), lines.end(), [](std::string_view l) {
    auto t = trim(l);
    return !t.empty() && t.front() == '=';
  });

  std::vector<OutlineEntry> raw;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    std::size_t line_no = i + 1;
    if (trim(line).empty()) continue;
    if (wiki) {
      auto t = trim(line);
      if (t.front() != '=') continue;  // body text
      std::size_t lead = t.find_first_not_of('=');
      if (lead == std::string_view::npos) {
        throw Error(ErrorCode::MalformedOutline, "line " + std::to_string(line_no) + ": heading has no text");
      }
      std::size_t trail = t.size() - 1 - t.find_last_not_of('=');
      if (lead != trail || lead < 2) {
        throw Error(ErrorCode::MalformedOutline,
                    "line " + std::to_string(line_no) + ": unbalanced heading markers");
      }
      auto inner = t.substr(lead, t.size() - lead - trail);
      raw.push_back({normalized_heading(inner, line_no), static_cast<int>(lead) - 1});
    } else {
      std::size_t tabs = 0;
      while (tabs < line.size() && line[tabs] == '\t') ++tabs;
      raw.push_back({normalized_heading(line.substr(tabs), line_no), static_cast<int>(tabs) + 1});
    }
  }

  int prev = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].depth > prev + 1) {
      throw Error(ErrorCode::MalformedOutline, "entry " + std::to_string(i + 1) + " ('" + raw[i].heading +
                                                   "') jumps from depth " + std::to_string(prev) + " to " +
                                                   std::to_string(raw[i].depth));
    }
    prev = raw[i].depth;
  }

  OutlineDocument doc{std::move(topic), {}};
  int skip_below = 0;  // > 0 while inside a stop section of that depth
  for (auto& entry : raw) {
    if (skip_below > 0) {
      if (entry.depth > skip_below) continue;
      skip_below = 0;
    }
    if (is_stop_section(entry.heading)) {
      skip_below = entry.depth;
      continue;
    }
    doc.entries.push_back(std::move(entry));
  }
  return doc;
}

std::string render_outline(const OutlineDocument& doc) {
  std::string out;
  for (const auto& e : doc.entries) {
    out.append(static_cast<std::size_t>(e.depth - 1), '\t');
    out += e.heading;
    out.push_back('\n');
  }
  return out;
}

FacetTree initial_facets(const OutlineDocument& doc) {
  FacetTree tree(doc.topic);
  FacetPath current;
  for (const auto& e : doc.entries) {
    current.resize(static_cast<std::size_t>(e.depth - 1));
    current.push_back(e.heading);
    tree.insert_unchecked(current);
  }
  return tree;
}

std::map<TopicId, OutlineDocument> load_outlines(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "outline directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".txt" || ext == ".wiki")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<TopicId, OutlineDocument> out;
  for (const auto& file : files) {
    TopicId topic = file.stem().string();
    try {
      out[topic] = parse_outline(read_file(file), topic);
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Course dataset

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::SchemaError, where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing '") + key + "'");
  return *it;
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) schema_error(where, "expected a string");
  return v.get<std::string>();
}

FacetPath as_path(const json& v, const std::string& where) {
  if (v.is_string()) return parse_path(v.get<std::string>());
  if (!v.is_array()) schema_error(where, "expected a facet path (array of names or 'a/b' string)");
  FacetPath path;
  for (std::size_t i = 0; i < v.size(); ++i) path.push_back(as_string(v[i], where + "/" + std::to_string(i)));
  return path;
}

DependencyEdge as_edge(const json& v, const std::string& where, double* score) {
  if (!v.is_array() || v.size() < 2 || v.size() > 3) schema_error(where, "expected [from, to] or [from, to, score]");
  DependencyEdge edge{as_string(v[0], where + "/0"), as_string(v[1], where + "/1")};
  if (score) {
    *score = 1.0;
    if (v.size() == 3) {
      if (!v[2].is_number()) schema_error(where + "/2", "expected a number");
      *score = v[2].get<double>();
    }
  }
  return edge;
}

}  // namespace

CourseDataset parse_course(std::string_view json_text) {
  CourseDataset ds;
  if (trim(json_text).empty()) return ds;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_error("byte " + std::to_string(e.byte), e.what());
  }
  if (!root.is_object()) schema_error("/", "expected an object");

  if (auto it = root.find("name"); it != root.end()) ds.name = as_string(*it, "/name");

  if (auto it = root.find("topics"); it != root.end()) {
    if (!it->is_array()) schema_error("/topics", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      std::string where = "/topics/" + std::to_string(i);
      const json& t = (*it)[i];
      if (!t.is_object()) schema_error(where, "expected an object");
      Topic topic;
      topic.id = as_string(require(t, "id", where), where + "/id");
      topic.label = t.contains("label") ? as_string(t["label"], where + "/label") : topic.id;
      if (t.contains("hypernym") && !t["hypernym"].is_null()) {
        topic.hypernym = as_string(t["hypernym"], where + "/hypernym");
      }
      ds.topics.push_back(std::move(topic));
    }
  }

  if (auto it = root.find("fragments"); it != root.end()) {
    if (!it->is_array()) schema_error("/fragments", "expected an array");
    ds.fragments.reserve(it->size());
    for (std::size_t i = 0; i < it->size(); ++i) {
      std::string where = "/fragments/" + std::to_string(i);
      const json& f = (*it)[i];
      if (!f.is_object()) schema_error(where, "expected an object");
      DatasetFragment frag;
      frag.topic = as_string(require(f, "topic", where), where + "/topic");
      frag.text = as_string(require(f, "text", where), where + "/text");
      if (f.contains("facets")) {
        const json& facets = f["facets"];
        if (!facets.is_array()) schema_error(where + "/facets", "expected an array");
        for (std::size_t j = 0; j < facets.size(); ++j) {
          frag.facets.push_back(as_path(facets[j], where + "/facets/" + std::to_string(j)));
        }
      }
      ds.fragments.push_back(std::move(frag));
    }
  }

  if (auto it = root.find("facet_trees"); it != root.end()) {
    if (!it->is_object()) schema_error("/facet_trees", "expected an object keyed by topic id");
    for (const auto& [topic, entries] : it->items()) {
      std::string where = "/facet_trees/" + topic;
      if (!entries.is_array()) schema_error(where, "expected an array");
      FacetTree tree(topic);
      for (std::size_t j = 0; j < entries.size(); ++j) {
        std::string ew = where + "/" + std::to_string(j);
        const json& e = entries[j];
        FacetPath path = e.is_object() ? as_path(require(e, "path", ew), ew + "/path") : as_path(e, ew);
        if (path.empty()) schema_error(ew, "empty facet path");
        // A listed path implies its ancestors.
        for (std::size_t n = 1; n <= path.size(); ++n) tree.insert_unchecked(FacetPath(path.begin(), path.begin() + n));
      }
      ds.facet_trees.emplace(topic, std::move(tree));
    }
  }

  if (auto it = root.find("dependencies"); it != root.end()) {
    if (!it->is_array()) schema_error("/dependencies", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      double score = 1.0;
      auto edge = as_edge((*it)[i], "/dependencies/" + std::to_string(i), &score);
      ds.dependencies.emplace_back(std::move(edge), score);
    }
  }

  if (auto it = root.find("negative_dependencies"); it != root.end()) {
    if (!it->is_array()) schema_error("/negative_dependencies", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      ds.negative_dependencies.push_back(as_edge((*it)[i], "/negative_dependencies/" + std::to_string(i), nullptr));
    }
  }

  check_integrity(ds);
  return ds;
}

CourseDataset load_course(const fs::path& path) { return parse_course(read_file(path)); }

void check_integrity(const CourseDataset& ds) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::IntegrityError, msg); };
  std::map<TopicId, const Topic*> topics;
  for (const auto& t : ds.topics) {
    if (!is_valid_slug(t.id)) fail("topic id '" + t.id + "' is not a slug");
    if (!topics.emplace(t.id, &t).second) fail("duplicate topic id '" + t.id + "'");
  }
  for (const auto& t : ds.topics) {
    if (t.hypernym && !topics.count(*t.hypernym)) fail("topic '" + t.id + "' has unknown hypernym");
  }
  for (const auto& t : ds.topics) {
    std::set<TopicId> seen{t.id};
    auto cur = t.hypernym;
    while (cur) {
      if (!seen.insert(*cur).second) fail("hypernym cycle through '" + *cur + "'");
      cur = topics.at(*cur)->hypernym;
    }
  }
  for (const auto& [topic, tree] : ds.facet_trees) {
    if (!topics.count(topic)) fail("facet tree for unknown topic '" + topic + "'");
  }
  for (std::size_t i = 0; i < ds.fragments.size(); ++i) {
    const auto& f = ds.fragments[i];
    std::string where = "fragment " + std::to_string(i);
    if (!topics.count(f.topic)) fail(where + " has unknown topic '" + f.topic + "'");
    if (trim(f.text).empty()) fail(where + " is blank");
    auto tree = ds.facet_trees.find(f.topic);
    for (const auto& path : f.facets) {
      if (path.empty() || tree == ds.facet_trees.end() || !tree->second.facets().count(path)) {
        fail(where + " labelled with unknown facet '" + format_path(path) + "'");
      }
    }
  }
  auto check_edge = [&](const DependencyEdge& e, const char* what) {
    if (!topics.count(e.first) || !topics.count(e.second)) {
      fail(std::string(what) + " (" + e.first + ", " + e.second + ") references an unknown topic");
    }
    if (e.first == e.second) fail(std::string(what) + " self loop on '" + e.first + "'");
  };
  for (const auto& [edge, score] : ds.dependencies) {
    check_edge(edge, "dependency");
    if (!(score >= 0.0 && score <= 1.0)) fail("dependency score outside [0,1]");
  }
  for (const auto& edge : ds.negative_dependencies) check_edge(edge, "negative dependency");
}

std::string course_to_json(const CourseDataset& ds) {
  json root = json::object();
  root["name"] = ds.name;
  json topics = json::array();
  for (const auto& t : ds.topics) {
    topics.push_back({{"id", t.id}, {"label", t.label}, {"hypernym", t.hypernym ? json(*t.hypernym) : json()}});
  }
  root["topics"] = std::move(topics);
  json fragments = json::array();
  for (const auto& f : ds.fragments) {
    json facets = json::array();
    for (const auto& p : f.facets) facets.push_back(p);
    fragments.push_back({{"topic", f.topic}, {"text", f.text}, {"facets", std::move(facets)}});
  }
  root["fragments"] = std::move(fragments);
  json trees = json::object();
  for (const auto& [topic, tree] : ds.facet_trees) {
    json entries = json::array();
    for (const auto& p : tree.facets()) entries.push_back({{"path", p}});
    trees[topic] = std::move(entries);
  }
  root["facet_trees"] = std::move(trees);
  json deps = json::array();
  for (const auto& [edge, score] : ds.dependencies) deps.push_back({edge.first, edge.second, score});
  root["dependencies"] = std::move(deps);
  if (!ds.negative_dependencies.empty()) {
    json neg = json::array();
    for (const auto& e : ds.negative_dependencies) neg.push_back({e.first, e.second});
    root["negative_dependencies"] = std::move(neg);
  }
  return root.dump(1) + "\n";
}

CourseStats stats(const CourseDataset& ds) {
  return CourseStats{ds.topics.size(), ds.fragments.size(), ds.dependencies.size()};
}

KnowledgeForest forest_from_dataset(const CourseDataset& ds) {
  KnowledgeForest forest;
  for (const auto& t : ds.topics) forest.add_topic(t);
  for (const auto& [topic, tree] : ds.facet_trees) forest.mfts[topic].tree = tree;
  for (const auto& f : ds.fragments) {
    auto& mft = forest.mfts[f.topic];
    auto frag = KnowledgeFragment::make(f.topic, f.text);
    for (const auto& path : f.facets) mft.assembly.emplace(path, frag.id);
    mft.fragments.emplace(frag.id, std::move(frag));
  }
  for (const auto& [edge, score] : ds.dependencies) forest.dependencies[edge] = score;
  return forest;
}

CourseDataset dataset_from_forest(const KnowledgeForest& forest, std::string name) {
  CourseDataset ds;
  ds.name = std::move(name);
  for (const auto& [id, topic] : forest.topics) ds.topics.push_back(topic);
  for (const auto& [id, mft] : forest.mfts) {
    ds.facet_trees.emplace(id, mft.tree);
    std::map<std::string, std::vector<FacetPath>> labels;
    for (const auto& [path, frag] : mft.assembly) labels[frag].push_back(path);
    for (const auto& [fid, frag] : mft.fragments) {
      ds.fragments.push_back({frag.topic, frag.text, labels[fid]});
    }
  }
  for (const auto& [edge, score] : forest.dependencies) ds.dependencies.emplace_back(edge, score);
  return ds;
}

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingTable::insert(std::string token, std::vector<double> vec) {
  if (vec.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "token '" + token + "' has " + std::to_string(vec.size()) +
                                                  " components, expected " + std::to_string(dim_));
  }
  if (!std::all_of(vec.begin(), vec.end(), [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::DimensionMismatch, "token '" + token + "' has a non-finite component");
  }
  vectors_.insert_or_assign(std::move(token), std::move(vec));
}

std::vector<double> EmbeddingTable::lookup(std::string_view token) const {
  if (token == kPadToken) return std::vector<double>(dim_, 0.0);
  if (auto it = vectors_.find(token); it != vectors_.end()) return it->second;
  Rng rng(fnv1a64(token) ^ (seed_ * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
  std::vector<double> vec(dim_);
  for (auto& x : vec) x = rng.uniform(-0.1, 0.1);
  return vec;
}

EmbeddingTable parse_embeddings(std::string_view text, std::uint64_t seed) {
  auto lines = split_lines(text);
  std::size_t dim = 0;
  bool first = true;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto fields = split_ws(lines[i]);
    if (fields.empty()) continue;
    auto is_int = [](std::string_view s) {
      return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (first && fields.size() == 2 && is_int(fields[0]) && is_int(fields[1])) {
      first = false;
      std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), dim);
      continue;
    }
    first = false;
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double x = 0;
      auto [ptr, ec] = std::from_chars(fields[j].data(), fields[j].data() + fields[j].size(), x);
      if (ec != std::errc() || ptr != fields[j].data() + fields[j].size() || !std::isfinite(x)) {
        throw Error(ErrorCode::DimensionMismatch,
                    "line " + std::to_string(i + 1) + ": bad component '" + std::string(fields[j]) + "'");
      }
      vec.push_back(x);
    }
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim || dim == 0) {
      throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(i + 1) + ": " +
                                                    std::to_string(vec.size()) + " components, expected " +
                                                    std::to_string(dim));
    }
    rows.emplace_back(std::string(fields[0]), std::move(vec));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyTable, "embedding file has no vectors");
  EmbeddingTable table(dim, seed);
  for (auto& [token, vec] : rows) table.insert(std::move(token), std::move(vec));
  return table;
}

EmbeddingTable load_embeddings(const fs::path& path, std::uint64_t seed) {
  return parse_embeddings(read_file(path), seed);
}

// ---------------------------------------------------------------------------
// FaLT repository

void FaltRepository::insert(const std::string& facet, std::string text) { shared_[facet] = std::move(text); }

void FaltRepository::insert_for_topic(const TopicId& topic, const std::string& facet, std::string text) {
  per_topic_[{topic, facet}] = std::move(text);
}

FaltText FaltRepository::lookup(const TopicId& topic, const std::string& facet) const {
  std::string key = facet;
  try {
    key = normalize_facet_name(facet);
  } catch (const Error&) {
  }
  if (auto it = per_topic_.find({topic, key}); it != per_topic_.end()) return {it->second, false};
  if (auto it = shared_.find(key); it != shared_.end()) return {it->second, false};
  return {facet, true};
}

FaltRepository load_falt(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::EmptyRepository, "FaLT directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  FaltRepository repo;
  for (const auto& file : files) {
    auto rel = fs::relative(file, dir);
    std::string name;
    try {
      name = normalize_facet_name(file.stem().string());
    } catch (const Error&) {
      repo.warn(rel.string() + ": file name is not a facet name, skipped");
      continue;
    }
    std::string text(trim(read_file(file)));
    if (text.empty()) {
      repo.warn(rel.string() + ": empty FaLT, skipped");
      continue;
    }
    auto parent = rel.parent_path();
    if (parent.empty()) {
      repo.insert(name, std::move(text));
    } else if (std::distance(parent.begin(), parent.end()) == 1) {
      repo.insert_for_topic(parent.string(), name, std::move(text));
    } else {
      repo.warn(rel.string() + ": nested too deep, skipped");
    }
  }
  return repo;
}

}  // namespace kforest
