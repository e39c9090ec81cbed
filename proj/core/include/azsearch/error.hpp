#pragma once

#include <stdexcept>
#include <string>

namespace azsearch {

// Values double as CLI exit codes.
enum class ErrorCategory : int {
  config = 2,
  data = 3,
  numeric = 4,
};

const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCategory::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorCategory::data, message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error(ErrorCategory::numeric, message) {}
};

// Throws the concrete error type for `category` with `message`.
[[noreturn]] void throw_error(ErrorCategory category, const std::string& message);

}  // namespace azsearch
