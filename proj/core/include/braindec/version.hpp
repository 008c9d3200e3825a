#pragma once

namespace braindec {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace braindec
