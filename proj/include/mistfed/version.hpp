#pragma once

#include <string_view>

namespace mistfed {

inline constexpr std::string_view kProjectName = "mistfed";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace mistfed
