#pragma once

#include <stdexcept>
#include <string>

namespace geocap {

// Base error. `category()` is a stable machine-parsable tag; the CLI prints
// "error: <category>: <message>" on a single line and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("dimension", m) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error("domain", m) {}
};

struct DegenerateRowError : Error {
  explicit DegenerateRowError(const std::string& m) : Error("degenerate", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

struct VocabError : Error {
  explicit VocabError(const std::string& m) : Error("vocab", m) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error("parse", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct InvalidBoxError : Error {
  explicit InvalidBoxError(const std::string& m) : Error("invalid_box", m) {}
};

struct EmptyCaptionError : Error {
  explicit EmptyCaptionError(const std::string& m) : Error("empty_caption", m) {}
};

struct EmptyDetectionsError : Error {
  explicit EmptyDetectionsError(const std::string& m)
      : Error("empty_detections", m) {}
};

struct NonFiniteError : Error {
  explicit NonFiniteError(const std::string& m) : Error("nonfinite", m) {}
};

}  // namespace geocap
