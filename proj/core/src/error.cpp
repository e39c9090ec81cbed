#include "azsearch/error.hpp"

namespace azsearch {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::config:
      return "config";
    case ErrorCategory::data:
      return "data";
    case ErrorCategory::numeric:
      return "numeric";
  }
  return "unknown";
}

void throw_error(ErrorCategory category, const std::string& message) {
  switch (category) {
    case ErrorCategory::config:
      throw ConfigError(message);
    case ErrorCategory::data:
      throw DataError(message);
    case ErrorCategory::numeric:
      break;
  }
  throw NumericError(message);
}

}  // namespace azsearch
