#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ugauge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or a line could not be parsed.
class ParseError : public Error {
public:
  ParseError(const std::string &source, std::size_t line, const std::string &what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A record violates a data-model invariant.
class ValidationError : public Error {
public:
  ValidationError(const std::string &record_id, const std::string &field,
                  const std::string &what)
      : Error("record '" + record_id + "', field '" + field + "': " + what),
        record_id_(record_id), field_(field) {}

  const std::string &record_id() const noexcept { return record_id_; }
  const std::string &field() const noexcept { return field_; }

private:
  std::string record_id_;
  std::string field_;
};

/// A precondition on numeric arguments was violated.
class DomainError : public Error {
public:
  using Error::Error;
};

/// The metric needs a retrained-model input that was not supplied.
class RequiresRetrainedError : public Error {
public:
  explicit RequiresRetrainedError(const std::string &metric)
      : Error(metric + " requires retrained model (M_r) inputs; none supplied") {}
};

} // namespace ugauge
