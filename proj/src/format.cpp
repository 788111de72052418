#include "loadcast/format.hpp"

#include <charconv>

namespace loadcast {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace loadcast
