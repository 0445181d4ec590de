#pragma once

namespace sbikit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sbikit
