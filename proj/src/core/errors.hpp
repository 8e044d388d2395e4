#pragma once

#include <stdexcept>
#include <string>

namespace tdoa {

enum class ErrorKind {
  InvalidArgument,
  DegenerateGeometry,
  Divergence,
  Input,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorKind::InvalidArgument, what}; }
inline Error degenerate_geometry(const std::string& what) { return {ErrorKind::DegenerateGeometry, what}; }

// Validation failure in an input file. The message always carries
// "<file>:<line>: <field>: <reason>".
class InputError : public Error {
 public:
  InputError(std::string file, int line, std::string field, const std::string& reason)
      : Error(ErrorKind::Input, format(file, line, field, reason)),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& file, int line, const std::string& field,
                            const std::string& reason) {
    return file + ":" + std::to_string(line) + ": " + field + ": " + reason;
  }

  std::string file_;
  int line_;
  std::string field_;
};

}  // namespace tdoa
