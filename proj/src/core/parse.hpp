#pragma once

#include "core/error.hpp"

#include <charconv>
#include <string>
#include <string_view>

namespace regtrack {

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end)
    fail(ErrorCode::parse, "invalid value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

inline bool parse_switch(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  fail(ErrorCode::parse, "expected on/off for " + std::string(key) + ", got '" + std::string(value) + "'");
}

// Shortest decimal text that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace regtrack
