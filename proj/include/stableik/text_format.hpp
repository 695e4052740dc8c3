#ifndef STABLEIK_TEXT_FORMAT_HPP_
#define STABLEIK_TEXT_FORMAT_HPP_

#include <string>
#include <string_view>

namespace stableik {

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

/// Strict full-token parse; throws ParseError("<context>: ...") on failure.
double parse_double(std::string_view text, const std::string& context);

}  // namespace stableik

#endif  // STABLEIK_TEXT_FORMAT_HPP_
