#pragma once

namespace sprint {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace sprint
