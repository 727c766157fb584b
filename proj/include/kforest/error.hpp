#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kforest {

enum class ErrorCode {
  UnknownParent,
  DuplicateSibling,
  UnknownFacet,
  TopicMismatch,
  UnknownTopic,
  CyclicDependencies,
  InvalidTopic,
  MalformedOutline,
  EmptyAfterNormalization,
  SchemaError,
  IntegrityError,
  DimensionMismatch,
  EmptyTable,
  EmptyRepository,
  HypernymCycle,
  NonFiniteProbability,
  InvalidParams,
  EmptyDocument,
  DegenerateLabels,
  UntrainedModel,
  ShapeMismatch,
  EmptyTrainingSet,
  NonFiniteLoss,
  EmptyFacetTree,
  ParseError,
  UnknownPredicate,
  DanglingReference,
  NoActiveLabels,
  InvalidSpec,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. The code is stable and is what
// callers (and the CLI exit path) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when a dependency relation must be acyclic but is not.
class CycleError : public Error {
 public:
  CycleError(std::vector<std::string> witness);

  // Topic ids along one cycle; the first id is repeated at the end.
  const std::vector<std::string>& witness() const noexcept { return witness_; }

 private:
  std::vector<std::string> witness_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(ErrorCode::ParseError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace kforest
