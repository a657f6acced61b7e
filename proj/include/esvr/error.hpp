#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace esvr {

// Every error carries the module that raised it; the CLI prints
// "<module>: <message>" on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }
  std::string describe() const { return module_ + ": " + what(); }

 private:
  std::string module_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public IoError {
 public:
  FileNotFound(std::string module, const std::string& path)
      : IoError(std::move(module), "file not found: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// A record does not match its schema. `field` names the offending field and
// `line` is the 1-based JSONL line (0 when not read from a file).
class SchemaError : public Error {
 public:
  SchemaError(std::string module, std::string field, const std::string& message, std::size_t line = 0)
      : Error(std::move(module), format(field, message, line)),
        field_(std::move(field)),
        message_(message),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& message() const noexcept { return message_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message, std::size_t line) {
    std::string out;
    if (line != 0) out += "line " + std::to_string(line) + ": ";
    out += "field '" + field + "': " + message;
    return out;
  }

  std::string field_;
  std::string message_;
  std::size_t line_;
};

// Model output that could not be interpreted. Keeps the raw text.
class ParseError : public Error {
 public:
  ParseError(std::string module, const std::string& message, std::string raw)
      : Error(std::move(module), message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  BackendError(std::string module, int status, std::string body_excerpt)
      : Error(std::move(module),
              "backend returned HTTP " + std::to_string(status) + ": " + body_excerpt),
        status_(status),
        body_excerpt_(std::move(body_excerpt)) {}

  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace esvr
