#pragma once

#include <string>
#include <string_view>

namespace tsgmm {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& value);

}  // namespace tsgmm
