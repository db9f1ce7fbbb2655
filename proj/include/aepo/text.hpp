#pragma once

#include <charconv>
#include <string>

namespace aepo::text {

// Shortest decimal form that round-trips the exact double. Used for the wire
// format and every CSV writer, so identical runs produce identical bytes.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace aepo::text
