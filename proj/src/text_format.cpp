#include "stableik/text_format.hpp"

#include <charconv>

#include "stableik/errors.hpp"

namespace stableik {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(context + ": invalid number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace stableik
