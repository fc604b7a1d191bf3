#pragma once

#include <string_view>

namespace retag {

inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace retag
