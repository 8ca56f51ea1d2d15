#pragma once

namespace clost {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace clost
