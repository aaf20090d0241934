#pragma once

namespace bandwig {

inline constexpr const char* kVersion = "1.0.0";

} // namespace bandwig
