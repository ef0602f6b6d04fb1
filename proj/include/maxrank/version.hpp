#pragma once

namespace maxrank {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace maxrank
