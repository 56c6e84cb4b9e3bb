// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maglab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (negative field
/// magnitude, non-finite flux, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A material law violates strong monotonicity or Lipschitz continuity.
class CertificationError : public Error {
 public:
  using Error::Error;
};

/// A formulation needs a law capability the configured law cannot provide.
class UnsupportedLawError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failures.
class OperatorError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

enum class Severity { note, warning, error };

struct Diagnostic {
  std::string path;
  int line = 0;  // 1-based, 0 when not tied to a line
  std::string message;
  Severity severity = Severity::error;

  std::string str() const {
    std::ostringstream os;
    os << (path.empty() ? "<input>" : path);
    if (line > 0) os << ':' << line;
    os << ": " << (severity == Severity::error     ? "error"
                   : severity == Severity::warning ? "warning"
                                                   : "note")
       << ": " << message;
    return os.str();
  }
};

/// Error carrying one or more file diagnostics.
class DiagnosticError : public Error {
 public:
  explicit DiagnosticError(std::vector<Diagnostic> diags)
      : Error(join(diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      out += d.str();
    }
    return out.empty() ? std::string("unknown input error") : out;
  }

  std::vector<Diagnostic> diagnostics_;
};

/// Malformed file content (mesh, B-H table, VTK, ...).
class ParseError : public DiagnosticError {
 public:
  using DiagnosticError::DiagnosticError;
  ParseError(std::string path, int line, std::string message)
      : DiagnosticError({Diagnostic{std::move(path), line, std::move(message),
                                    Severity::error}}) {}
};

/// Invalid run configuration; mapped to exit code 2 by the CLI.
class ConfigError : public DiagnosticError {
 public:
  using DiagnosticError::DiagnosticError;
  explicit ConfigError(std::string message, std::string path = {})
      : DiagnosticError({Diagnostic{std::move(path), 0, std::move(message),
                                    Severity::error}}) {}
};

}  // namespace maglab
