#pragma once

#include <stdexcept>
#include <string>

namespace saedet {

// Every library failure derives from Error and carries a stable short code
// that the CLI prints as a diagnostic prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("E_IO", what) {}
};

// Malformed bytes or text in an input file.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("E_PARSE", what) {}
};

// Well-formed input that violates a domain invariant (NaN weights, duplicate ids, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("E_VALIDATION", what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("E_SHAPE", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("E_CONFIG", what) {}
};

// Data is structurally valid but unusable for the requested analysis
// (empty document, single-class fit set, no eligible domain, ...).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("E_DATA", what) {}
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step)
      : Error("E_TRAIN", what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace saedet
