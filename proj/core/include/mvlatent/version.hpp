#pragma once

#include <string_view>

namespace mvlatent {

inline constexpr std::string_view kToolVersion = "mvlatent-0.1.0";

}  // namespace mvlatent
