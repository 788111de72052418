#pragma once

#include <string>

namespace loadcast {

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace loadcast
