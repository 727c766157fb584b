#include "kforest/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "kforest/error.hpp"
#include "kforest/ingest.hpp"

namespace kforest::rdf {

namespace {

bool unreserved(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '.' ||
         c == '_' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string percent_encode(std::string_view local) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : local) {
    if (unreserved(c)) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(digits[c >> 4]);
      out.push_back(digits[c & 15]);
    }
  }
  return out;
}

std::string percent_decode(std::string_view encoded) {
  std::string out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] != '%') {
      out.push_back(encoded[i]);
      continue;
    }
    if (i + 2 >= encoded.size()) {
      throw ParseError(0, 0, "truncated percent escape in '" + std::string(encoded) + "'");
    }
    int hi = hex_value(encoded[i + 1]);
    int lo = hex_value(encoded[i + 2]);
    if (hi < 0 || lo < 0) throw ParseError(0, 0, "bad percent escape in '" + std::string(encoded) + "'");
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

std::string topic_iri(const TopicId& topic) { return std::string(kBase) + "topic/" + percent_encode(topic); }

std::string facet_iri(const TopicId& topic, const FacetPath& path) {
  std::string out = std::string(kBase) + "facet/" + percent_encode(topic);
  for (const auto& name : path) out += "/" + percent_encode(name);
  return out;
}

std::string fragment_iri(const TopicId& topic, const std::string& fragment_id) {
  return std::string(kBase) + "frag/" + percent_encode(topic) + "/" + percent_encode(fragment_id);
}

std::string dependency_iri(const DependencyEdge& edge) {
  return std::string(kBase) + "dep/" + percent_encode(edge.first) + "/" + percent_encode(edge.second);
}

std::string predicate_iri(std::string_view local) { return std::string(kBase) + std::string(local); }

std::string escape_literal(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20 || c == 0x7F) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04X", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

}  // namespace kforest::rdf

namespace kforest {

namespace {

using namespace rdf;

std::string iri_term(const std::string& iri) { return "<" + iri + ">"; }

std::string literal_term(std::string_view text) { return "\"" + escape_literal(text) + "\""; }

std::string double_term(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return "\"" + std::string(buf, end) + "\"^^<" + std::string(kXsdDouble) + ">";
}

}  // namespace

std::string to_ntriples(const KnowledgeForest& forest) {
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  auto add = [&](std::string s, std::string_view p, std::string o) {
    triples.emplace(iri_term(s), iri_term(predicate_iri(p)), std::move(o));
  };
  for (const auto& [id, topic] : forest.topics) {
    add(topic_iri(id), kLabel, literal_term(topic.label));
    if (topic.hypernym) add(topic_iri(id), kSubTopicOf, iri_term(topic_iri(*topic.hypernym)));
  }
  for (const auto& [id, mft] : forest.mfts) {
    for (const auto& path : mft.tree.facets()) {
      if (path.empty()) continue;
      add(facet_iri(id, path), kLabel, literal_term(path.back()));
      if (path.size() == 1) {
        add(topic_iri(id), kHasFacet, iri_term(facet_iri(id, path)));
      } else {
        add(facet_iri(id, path), kSubFacetOf, iri_term(facet_iri(id, FacetPath(path.begin(), path.end() - 1))));
      }
    }
    for (const auto& [fid, frag] : mft.fragments) add(fragment_iri(id, fid), kText, literal_term(frag.text));
    for (const auto& [path, fid] : mft.assembly) {
      add(fragment_iri(id, fid), kAssembledTo, iri_term(facet_iri(id, path)));
    }
  }
  for (const auto& [edge, score] : forest.dependencies) {
    add(topic_iri(edge.first), kIsPrerequisiteOf, iri_term(topic_iri(edge.second)));
    add(dependency_iri(edge), kScore, double_term(score));
  }
  if (triples.empty()) return {};
  std::string out = "# kforest vocabulary v" + std::string(kVocabularyVersion) + " " + std::string(kBase) + "\n";
  for (const auto& [s, p, o] : triples) {
    out += s;
    out += ' ';
    out += p;
    out += ' ';
    out += o;
    out += " .\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Term {
  bool is_iri = false;
  std::string value;     // IRI or literal lexical form (unescaped)
  std::string datatype;  // literal only
  std::size_t column = 0;
};

struct Triple {
  Term subject, predicate, object;
  std::size_t line = 0;
};

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

  // Returns false for blank and comment-only lines.
  bool parse(Triple& t) {
    skip_ws();
    if (at_end() || peek() == '#') return false;
    t.line = line_;
    t.subject = subject();
    skip_ws();
    t.predicate = iri();
    skip_ws();
    t.object = object();
    skip_ws();
    expect('.');
    skip_ws();
    if (!at_end() && peek() != '#') fail("unexpected text after '.'");
    return true;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, pos_ + 1, what); }

  void skip_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void expect(char c) {
    if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::uint32_t hex_digits(std::size_t n) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (at_end()) fail("truncated unicode escape");
      int h = -1;
      char c = peek();
      if (c >= '0' && c <= '9') h = c - '0';
      else if (c >= 'a' && c <= 'f') h = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') h = c - 'A' + 10;
      if (h < 0) fail("bad hex digit in unicode escape");
      v = v * 16 + static_cast<std::uint32_t>(h);
      ++pos_;
    }
    if (v > 0x10FFFF || (v >= 0xD800 && v <= 0xDFFF)) fail("unicode escape outside the scalar range");
    return v;
  }

  Term subject() {
    if (!at_end() && peek() == '_') fail("blank nodes are not supported");
    return iri();
  }

  Term iri() {
    Term t;
    t.is_iri = true;
    t.column = pos_ + 1;
    expect('<');
    while (true) {
      if (at_end()) fail("unterminated IRI");
      char c = peek();
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '\\') {
        ++pos_;
        if (at_end()) fail("truncated escape in IRI");
        char kind = peek();
        ++pos_;
        if (kind == 'u') append_utf8(t.value, hex_digits(4));
        else if (kind == 'U') append_utf8(t.value, hex_digits(8));
        else fail("only \\u and \\U escapes are allowed in IRIs");
        continue;
      }
      unsigned char uc = static_cast<unsigned char>(c);
      if (uc <= 0x20 || c == '<' || c == '"' || c == '{' || c == '}' || c == '|' || c == '^' || c == '`') {
        fail("character not allowed in IRI");
      }
      t.value.push_back(c);
      ++pos_;
    }
    if (t.value.find(':') == std::string::npos) {
      pos_ = t.column - 1;
      fail("relative IRI");
    }
    return t;
  }

  Term object() {
    if (at_end()) fail("expected object");
    if (peek() == '<') return iri();
    if (peek() == '_') fail("blank nodes are not supported");
    if (peek() != '"') fail("expected IRI or literal");
    Term t;
    t.column = pos_ + 1;
    ++pos_;
    while (true) {
      if (at_end()) fail("unterminated literal");
      char c = peek();
      if (c == '"') {
        ++pos_;
        break;
      }
      if (c == '\n' || c == '\r') fail("raw line break in literal");
      if (c == '\\') {
        ++pos_;
        if (at_end()) fail("truncated escape");
        char e = peek();
        ++pos_;
        switch (e) {
          case 't': t.value.push_back('\t'); break;
          case 'b': t.value.push_back('\b'); break;
          case 'n': t.value.push_back('\n'); break;
          case 'r': t.value.push_back('\r'); break;
          case 'f': t.value.push_back('\f'); break;
          case '"': t.value.push_back('"'); break;
          case '\'': t.value.push_back('\''); break;
          case '\\': t.value.push_back('\\'); break;
          case 'u': append_utf8(t.value, hex_digits(4)); break;
          case 'U': append_utf8(t.value, hex_digits(8)); break;
          default: --pos_; fail("unknown escape");
        }
        continue;
      }
      t.value.push_back(c);
      ++pos_;
    }
    if (!at_end() && peek() == '^') {
      ++pos_;
      expect('^');
      t.datatype = iri().value;
    } else if (!at_end() && peek() == '@') {
      ++pos_;
      std::size_t start = pos_;
      while (!at_end() && ((peek() >= 'a' && peek() <= 'z') || (peek() >= 'A' && peek() <= 'Z') ||
                           (peek() >= '0' && peek() <= '9') || peek() == '-')) {
        ++pos_;
      }
      if (pos_ == start) fail("empty language tag");
    }
    return t;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

enum class Kind { Topic, Facet, Fragment, Dependency };

struct Resource {
  Kind kind;
  std::vector<std::string> parts;  // decoded path segments after the kind prefix
};

Resource resolve(const Term& term, std::size_t line) {
  auto dangling = [&](const std::string& why) {
    throw Error(ErrorCode::DanglingReference, "line " + std::to_string(line) + ": <" + term.value + "> " + why);
  };
  if (!term.is_iri) dangling("expected a resource, found a literal");
  std::string_view v = term.value;
  if (v.substr(0, kBase.size()) != kBase) dangling("is outside the vocabulary namespace");
  v.remove_prefix(kBase.size());
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    auto slash = v.find('/', start);
    try {
      segments.push_back(percent_decode(v.substr(start, slash - start)));
    } catch (const ParseError& e) {
      throw ParseError(line, term.column, e.what());
    }
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  const std::string kind = segments.front();
  segments.erase(segments.begin());
  auto any_empty = std::any_of(segments.begin(), segments.end(), [](const std::string& s) { return s.empty(); });
  if (kind == "topic" && segments.size() == 1 && !any_empty) return {Kind::Topic, segments};
  if (kind == "facet" && segments.size() >= 2 && !any_empty) return {Kind::Facet, segments};
  if (kind == "frag" && segments.size() == 2 && !any_empty) return {Kind::Fragment, segments};
  if (kind == "dep" && segments.size() == 2 && !any_empty) return {Kind::Dependency, segments};
  dangling("is not a topic, facet, fragment or dependency resource");
}

}  // namespace

KnowledgeForest from_ntriples(std::string_view text) {
  std::vector<Triple> triples;
  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    Triple t;
    if (LineParser(line, line_no).parse(t)) triples.push_back(std::move(t));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }

  KnowledgeForest forest;
  std::map<TopicId, std::string> labels;
  std::map<TopicId, TopicId> hypernyms;
  std::map<TopicId, std::set<FacetPath>> facets;
  struct PendingFragment {
    std::string text;
    bool has_text = false;
  };
  std::map<std::pair<TopicId, std::string>, PendingFragment> fragments;
  std::vector<std::tuple<TopicId, std::string, FacetPath, std::size_t>> assembly;
  std::set<DependencyEdge> edges;
  std::map<DependencyEdge, std::pair<double, std::size_t>> scores;
  std::vector<std::pair<TopicId, std::size_t>> referenced_topics;

  auto literal = [](const Triple& t) {
    if (t.object.is_iri) throw ParseError(t.line, t.object.column, "expected a literal object");
    return t.object.value;
  };
  auto facet_path = [](const Resource& r) { return FacetPath(r.parts.begin() + 1, r.parts.end()); };

  for (const auto& t : triples) {
    std::string_view pred = t.predicate.value;
    if (pred.substr(0, kBase.size()) != kBase) {
      throw Error(ErrorCode::UnknownPredicate, "line " + std::to_string(t.line) + ": <" + t.predicate.value + ">");
    }
    pred.remove_prefix(kBase.size());
    Resource s = resolve(t.subject, t.line);

    if (pred == kLabel) {
      auto value = literal(t);
      if (s.kind == Kind::Topic) {
        labels[s.parts[0]] = value;
      } else if (s.kind == Kind::Facet) {
        // Informational; the IRI carries the path.
      } else {
        throw ParseError(t.line, t.subject.column, "label on a resource that has none");
      }
    } else if (pred == kSubTopicOf) {
      Resource o = resolve(t.object, t.line);
      if (s.kind != Kind::Topic || o.kind != Kind::Topic) throw ParseError(t.line, 1, "subTopicOf links two topics");
      hypernyms[s.parts[0]] = o.parts[0];
      referenced_topics.emplace_back(o.parts[0], t.line);
    } else if (pred == kHasFacet) {
      Resource o = resolve(t.object, t.line);
      if (s.kind != Kind::Topic || o.kind != Kind::Facet || o.parts[0] != s.parts[0] || o.parts.size() != 2) {
        throw Error(ErrorCode::DanglingReference,
                    "line " + std::to_string(t.line) + ": hasFacet must link a topic to its own top-level facet");
      }
      facets[s.parts[0]].insert(facet_path(o));
    } else if (pred == kSubFacetOf) {
      Resource o = resolve(t.object, t.line);
      if (s.kind != Kind::Facet || o.kind != Kind::Facet || o.parts[0] != s.parts[0] ||
          facet_path(o) != FacetPath(s.parts.begin() + 1, s.parts.end() - 1)) {
        throw Error(ErrorCode::DanglingReference,
                    "line " + std::to_string(t.line) + ": subFacetOf must point at the facet's parent path");
      }
      facets[s.parts[0]].insert(facet_path(s));
    } else if (pred == kText) {
      if (s.kind != Kind::Fragment) throw ParseError(t.line, t.subject.column, "text on a non-fragment");
      auto& f = fragments[{s.parts[0], s.parts[1]}];
      f.text = literal(t);
      f.has_text = true;
    } else if (pred == kAssembledTo) {
      Resource o = resolve(t.object, t.line);
      if (s.kind != Kind::Fragment || o.kind != Kind::Facet || o.parts[0] != s.parts[0]) {
        throw Error(ErrorCode::DanglingReference,
                    "line " + std::to_string(t.line) + ": assembledTo must link a fragment to a facet of its topic");
      }
      fragments[{s.parts[0], s.parts[1]}];
      assembly.emplace_back(s.parts[0], s.parts[1], facet_path(o), t.line);
    } else if (pred == kIsPrerequisiteOf) {
      Resource o = resolve(t.object, t.line);
      if (s.kind != Kind::Topic || o.kind != Kind::Topic) {
        throw ParseError(t.line, 1, "isPrerequisiteOf links two topics");
      }
      edges.emplace(s.parts[0], o.parts[0]);
    } else if (pred == kScore) {
      if (s.kind != Kind::Dependency) throw ParseError(t.line, t.subject.column, "score on a non-dependency");
      if (t.object.is_iri || t.object.datatype != kXsdDouble) {
        throw ParseError(t.line, t.object.column, "score must be an xsd:double literal");
      }
      double value = 0;
      const auto& lex = t.object.value;
      auto [ptr, ec] = std::from_chars(lex.data(), lex.data() + lex.size(), value);
      if (ec != std::errc() || ptr != lex.data() + lex.size()) {
        throw ParseError(t.line, t.object.column, "malformed double '" + lex + "'");
      }
      scores[{s.parts[0], s.parts[1]}] = {value, t.line};
    } else {
      throw Error(ErrorCode::UnknownPredicate, "line " + std::to_string(t.line) + ": <" + t.predicate.value + ">");
    }
  }

  for (const auto& [id, label] : labels) {
    Topic topic{id, label, std::nullopt};
    if (auto it = hypernyms.find(id); it != hypernyms.end()) topic.hypernym = it->second;
    forest.add_topic(topic);
  }
  auto require_topic = [&](const TopicId& id, const std::string& where) {
    if (!forest.topics.count(id)) {
      throw Error(ErrorCode::DanglingReference, where + ": topic '" + id + "' has no label triple");
    }
  };
  for (const auto& [id, line] : referenced_topics) require_topic(id, "line " + std::to_string(line));
  for (const auto& [id, _] : hypernyms) require_topic(id, "subTopicOf");
  for (const auto& [id, paths] : facets) {
    require_topic(id, "facet");
    for (const auto& p : paths) forest.mfts[id].tree.insert_unchecked(p);
  }
  for (const auto& [key, f] : fragments) {
    require_topic(key.first, "fragment " + key.second);
    if (!f.has_text) throw Error(ErrorCode::DanglingReference, "fragment " + key.second + " has no text triple");
    forest.mfts[key.first].fragments.emplace(key.second, KnowledgeFragment{key.second, key.first, f.text});
  }
  for (const auto& [topic, fid, path, line] : assembly) {
    if (!forest.mfts[topic].tree.facets().count(path)) {
      throw Error(ErrorCode::DanglingReference,
                  "line " + std::to_string(line) + ": facet '" + format_path(path) + "' is not declared");
    }
    forest.mfts[topic].assembly.emplace(path, fid);
  }
  for (const auto& edge : edges) {
    require_topic(edge.first, "isPrerequisiteOf");
    require_topic(edge.second, "isPrerequisiteOf");
    auto it = scores.find(edge);
    if (it == scores.end()) {
      throw Error(ErrorCode::DanglingReference, "dependency (" + edge.first + ", " + edge.second + ") has no score");
    }
    forest.dependencies[edge] = it->second.first;
  }
  for (const auto& [edge, value] : scores) {
    if (!edges.count(edge)) {
      throw Error(ErrorCode::DanglingReference,
                  "line " + std::to_string(value.second) + ": score for an undeclared dependency");
    }
  }
  return forest;
}

// ---------------------------------------------------------------------------
// DOT

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string to_dot(const KnowledgeForest& forest, DotView view, const TopicId& topic) {
  std::string out;
  if (view == DotView::FacetTree) {
    auto it = forest.mfts.find(topic);
    if (!forest.topics.count(topic) || it == forest.mfts.end()) {
      throw Error(ErrorCode::UnknownTopic, "no topic '" + topic + "'");
    }
    const auto& tree = it->second.tree;
    out += "digraph " + dot_quote(topic) + " {\n";
    out += "  " + dot_quote(topic) + " [shape=box, label=" + dot_quote(forest.topics.at(topic).label) + "];\n";
    for (const auto& path : tree.facets()) {
      out += "  " + dot_quote(topic + "/" + format_path(path)) + " [label=" + dot_quote(path.back()) + "];\n";
    }
    for (const auto& path : tree.facets()) {
      std::string parent = path.size() == 1 ? topic : topic + "/" + format_path(FacetPath(path.begin(), path.end() - 1));
      out += "  " + dot_quote(parent) + " -> " + dot_quote(topic + "/" + format_path(path)) + ";\n";
    }
    out += "}\n";
    return out;
  }
  out += "digraph forest {\n";
  for (const auto& [id, t] : forest.topics) {
    out += "  " + dot_quote(id) + " [label=" + dot_quote(t.label) + "];\n";
  }
  for (const auto& [id, t] : forest.topics) {
    if (t.hypernym) out += "  " + dot_quote(*t.hypernym) + " -> " + dot_quote(id) + " [dir=none, style=dashed];\n";
  }
  for (const auto& [edge, score] : forest.dependencies) {
    out += "  " + dot_quote(edge.first) + " -> " + dot_quote(edge.second) + ";\n";
  }
  out += "}\n";
  return out;
}

std::string to_json(const KnowledgeForest& forest, const std::string& name) {
  return course_to_json(dataset_from_forest(forest, name));
}

KnowledgeForest from_json(std::string_view text) { return forest_from_dataset(parse_course(text)); }

}  // namespace kforest
