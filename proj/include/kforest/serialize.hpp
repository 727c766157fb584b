#pragma once

// Storage and export formats for a knowledge forest: N-Triples (canonical,
// byte-stable), Graphviz DOT views and the JSON interchange schema.

#include <string>
#include <string_view>

#include "kforest/core.hpp"

namespace kforest::rdf {

inline constexpr std::string_view kBase = "http://example.org/kf#";
inline constexpr std::string_view kXsdDouble = "http://www.w3.org/2001/XMLSchema#double";
inline constexpr std::string_view kVocabularyVersion = "1";

// Predicate local names.
inline constexpr std::string_view kHasFacet = "hasFacet";
inline constexpr std::string_view kSubFacetOf = "subFacetOf";
inline constexpr std::string_view kAssembledTo = "assembledTo";
inline constexpr std::string_view kIsPrerequisiteOf = "isPrerequisiteOf";
inline constexpr std::string_view kSubTopicOf = "subTopicOf";
inline constexpr std::string_view kLabel = "label";
inline constexpr std::string_view kText = "text";
inline constexpr std::string_view kScore = "score";

// Percent-encodes every byte outside [A-Za-z0-9-._~].
std::string percent_encode(std::string_view local);
std::string percent_decode(std::string_view encoded);  // throws ParseError(0, 0, ...) on bad escapes

std::string topic_iri(const TopicId& topic);
std::string facet_iri(const TopicId& topic, const FacetPath& path);
std::string fragment_iri(const TopicId& topic, const std::string& fragment_id);
std::string dependency_iri(const DependencyEdge& edge);
std::string predicate_iri(std::string_view local);

// N-Triples string literal body escaping (without the surrounding quotes).
std::string escape_literal(std::string_view text);

}  // namespace kforest::rdf

namespace kforest {

// Sorted, de-duplicated N-Triples with a version comment line; empty forest
// gives an empty document.
std::string to_ntriples(const KnowledgeForest& forest);

// Throws ParseError (line, column), UnknownPredicate or DanglingReference.
KnowledgeForest from_ntriples(std::string_view text);

enum class DotView { FacetTree, Overview };

// FacetTree view needs a topic (throws UnknownTopic); Overview draws topics
// with dependency arrows and undirected dashed hypernym links.
std::string to_dot(const KnowledgeForest& forest, DotView view, const TopicId& topic = {});

std::string to_json(const KnowledgeForest& forest, const std::string& name = {});
KnowledgeForest from_json(std::string_view text);  // throws SchemaError or IntegrityError

}  // namespace kforest
