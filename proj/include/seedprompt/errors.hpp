#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seedprompt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input records. Carries the 1-based line and field when known.
class DataError : public Error {
 public:
  DataError(const std::string& message, std::size_t line = 0,
            std::string field = {})
      : Error(format(message, line, field)), line_(line), field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            const std::string& field) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    return out + message;
  }

  std::size_t line_;
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GraphFormatError : public Error {
 public:
  enum class Kind { kVersion, kChecksum, kTruncated, kInvalid };

  GraphFormatError(Kind kind, const std::string& message)
      : Error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public PromptError {
 public:
  using PromptError::PromptError;
};

// Non-retryable HTTP status, or a malformed upstream body.
class ApiError : public Error {
 public:
  ApiError(const std::string& message, int status = 0, std::string body = {})
      : Error(message), status_(status), body_(std::move(body)) {}

  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

// Retries exhausted on transport failures or retryable statuses.
class UpstreamExhaustedError : public ApiError {
 public:
  using ApiError::ApiError;
};

class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::string digest)
      : Error("replay fixture has no entry for request digest " + digest),
        digest_(std::move(digest)) {}

  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

// The extractor model answered, but not in a shape we can parse.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& message, std::string raw_response)
      : Error(message), raw_response_(std::move(raw_response)) {}

  const std::string& raw_response() const { return raw_response_; }

 private:
  std::string raw_response_;
};

}  // namespace seedprompt
