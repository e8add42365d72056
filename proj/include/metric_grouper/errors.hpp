#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metric_grouper {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define METRIC_GROUPER_DEFINE_ERROR(Name) \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// Input/output and parsing.
METRIC_GROUPER_DEFINE_ERROR(IoError);
METRIC_GROUPER_DEFINE_ERROR(EmptyError);
METRIC_GROUPER_DEFINE_ERROR(ConfigError);

// Phrase embedding.
METRIC_GROUPER_DEFINE_ERROR(EmptyPhraseError);
METRIC_GROUPER_DEFINE_ERROR(AllUnknownError);

// Lexicon.
METRIC_GROUPER_DEFINE_ERROR(UnknownConceptError);
METRIC_GROUPER_DEFINE_ERROR(ZeroProbabilityError);
METRIC_GROUPER_DEFINE_ERROR(UnknownWordError);

// Composition and network.
METRIC_GROUPER_DEFINE_ERROR(DimensionMismatchError);
METRIC_GROUPER_DEFINE_ERROR(EmptyContextError);
METRIC_GROUPER_DEFINE_ERROR(UnknownPhraseError);

// Clustering and evaluation.
METRIC_GROUPER_DEFINE_ERROR(TooFewPointsError);
METRIC_GROUPER_DEFINE_ERROR(DegenerateError);
METRIC_GROUPER_DEFINE_ERROR(MissingLabelError);

// Pipeline.
METRIC_GROUPER_DEFINE_ERROR(PreconditionError);
METRIC_GROUPER_DEFINE_ERROR(MissingModelError);
METRIC_GROUPER_DEFINE_ERROR(HashMismatchError);

#undef METRIC_GROUPER_DEFINE_ERROR

/// Malformed input. `line` is 1-based, 0 when not tied to a line.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InsufficientNegativesError : public Error {
 public:
  InsufficientNegativesError(std::size_t required, std::size_t available)
      : Error("insufficient negative pairs: need " + std::to_string(required) +
              ", only " + std::to_string(available) +
              " distinct incompatible pairs exist (shortfall " +
              std::to_string(required - available) + ")"),
        required_(required),
        available_(available) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t available() const noexcept { return available_; }
  std::size_t shortfall() const noexcept { return required_ - available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t pair_index)
      : Error("non-finite parameter after epoch " + std::to_string(epoch) +
              ", pair " + std::to_string(pair_index)),
        epoch_(epoch),
        pair_index_(pair_index) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t pair_index() const noexcept { return pair_index_; }

 private:
  std::size_t epoch_;
  std::size_t pair_index_;
};

}  // namespace metric_grouper
