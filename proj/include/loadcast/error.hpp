#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadcast {

/// Coarse failure class, printed by the CLI as a machine-parsable prefix.
enum class ErrorCategory { config, io, data, copula, forecaster, ensemble, evaluation };

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace loadcast
