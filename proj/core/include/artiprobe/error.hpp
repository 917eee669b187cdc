#pragma once

#include <stdexcept>
#include <string>

namespace artiprobe {

// Bad input data or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        source_(source),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class UnknownPhonemeError : public ValidationError {
 public:
  explicit UnknownPhonemeError(const std::string& label)
      : ValidationError("unknown phoneme label '" + label + "'"), label_(label) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

// An EMA channel has too many missing samples to repair; the utterance is
// dropped rather than aborting the run.
class ExcessiveNanError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A failure during a numerical stage (divergence, degenerate statistics).
// The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the experiment pipeline; names the stage and utterance that failed.
class StageError : public RuntimeFailure {
 public:
  StageError(std::string stage, std::string utterance, const std::string& what)
      : RuntimeFailure("stage '" + stage + "' failed" +
                       (utterance.empty() ? std::string() : " on utterance '" + utterance + "'") +
                       ": " + what),
        stage_(std::move(stage)),
        utterance_(std::move(utterance)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& utterance() const noexcept { return utterance_; }

 private:
  std::string stage_;
  std::string utterance_;
};

}  // namespace artiprobe
