#include "loadcast/error.hpp"

namespace loadcast {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::copula: return "copula";
    case ErrorCategory::forecaster: return "forecaster";
    case ErrorCategory::ensemble: return "ensemble";
    case ErrorCategory::evaluation: return "evaluation";
  }
  return "unknown";
}

}  // namespace loadcast
