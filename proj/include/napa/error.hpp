#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace napa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bone with coincident endpoints, or alignment over collinear joints.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct FieldError {
  std::string path;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldError> fields)
      : Error(summarize(fields)), fields_(std::move(fields)) {}
  const std::vector<FieldError>& fields() const { return fields_; }

 private:
  static std::string summarize(const std::vector<FieldError>& fields) {
    std::string out = "validation failed";
    for (const auto& f : fields) out += "; " + f.path + ": " + f.message;
    return out;
  }
  std::vector<FieldError> fields_;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

// A training stage was started without the checkpoint of the previous stage.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

}  // namespace napa
