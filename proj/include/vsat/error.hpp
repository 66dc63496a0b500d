#pragma once

#include <stdexcept>
#include <string>

namespace vsat {

// Base for every error the library raises. `code()` is a stable machine
// identifier used in CLI messages and in the review API's error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("parse_error", "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format_error", message) {}
};

class IngestError : public Error {
 public:
  explicit IngestError(const std::string& message) : Error("ingest_error", message) {}
  IngestError(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

class AssetMissingError : public IngestError {
 public:
  explicit AssetMissingError(const std::string& path)
      : IngestError("asset_missing", "missing asset: " + path) {}
};

class UnsupportedFormatError : public IngestError {
 public:
  explicit UnsupportedFormatError(const std::string& message)
      : IngestError("unsupported_format", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message) : Error("backend_error", message) {}
  BackendError(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

class SchemaError : public BackendError {
 public:
  explicit SchemaError(const std::string& message) : BackendError("schema_error", message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation_error", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error("conflict", message) {}
};

}  // namespace vsat
