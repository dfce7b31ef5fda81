#pragma once

#include <charconv>
#include <string>

namespace tga {

// Shortest round-trip decimal form; identical bits always print identically,
// which keeps logs and reports byte-reproducible.
inline std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace tga
