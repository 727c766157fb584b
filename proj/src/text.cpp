#include "kforest/text.hpp"

#include <algorithm>
#include <cstdio>

#include "kforest/error.hpp"

namespace kforest {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::DuplicateSibling: return "DuplicateSibling";
    case ErrorCode::UnknownFacet: return "UnknownFacet";
    case ErrorCode::TopicMismatch: return "TopicMismatch";
    case ErrorCode::UnknownTopic: return "UnknownTopic";
    case ErrorCode::CyclicDependencies: return "CyclicDependencies";
    case ErrorCode::InvalidTopic: return "InvalidTopic";
    case ErrorCode::MalformedOutline: return "MalformedOutline";
    case ErrorCode::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::EmptyRepository: return "EmptyRepository";
    case ErrorCode::HypernymCycle: return "HypernymCycle";
    case ErrorCode::NonFiniteProbability: return "NonFiniteProbability";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::UntrainedModel: return "UntrainedModel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyFacetTree: return "EmptyFacetTree";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownPredicate: return "UnknownPredicate";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NoActiveLabels: return "NoActiveLabels";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string join_cycle(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += " -> ";
    out += id;
  }
  return out;
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

CycleError::CycleError(std::vector<std::string> witness)
    : Error(ErrorCode::CyclicDependencies, "cycle " + join_cycle(witness)),
      witness_(std::move(witness)) {}

const std::vector<std::string_view>& stopwords() {
  static const std::vector<std::string_view> words = {
      "a",    "about", "after", "all",   "also",  "an",    "and",   "are",  "as",   "at",
      "be",   "been",  "but",   "by",    "can",   "for",   "from",  "has",  "have", "if",
      "in",   "into",  "is",    "it",    "its",   "may",   "more",  "not",  "of",   "on",
      "one",  "or",    "other", "such",  "that",  "the",   "their", "then", "there", "these",
      "this", "to",    "used",  "was",   "when",  "which", "will",  "with", "would", "we",
  };
  return words;
}

bool is_stopword(std::string_view token) {
  static const std::vector<std::string_view> sorted = [] {
    auto v = stopwords();
    std::sort(v.begin(), v.end());
    return v;
  }();
  return std::binary_search(sorted.begin(), sorted.end(), token);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2 && !is_stopword(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    if (is_word_byte(static_cast<unsigned char>(ch))) {
      current.push_back(ascii_lower(ch));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string fragment_id(std::string_view text) { return hex16(fnv1a64(text)); }

std::string slugify(std::string_view label) {
  std::string out;
  bool pending_hyphen = false;
  for (char ch : label) {
    char c = ascii_lower(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      if (pending_hyphen && !out.empty()) out.push_back('-');
      pending_hyphen = false;
      out.push_back(c);
    } else {
      pending_hyphen = true;
    }
  }
  return out;
}

bool is_valid_slug(std::string_view id) noexcept {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

std::string_view trim(std::string_view s) noexcept {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

}  // namespace kforest
