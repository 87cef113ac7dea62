#pragma once

namespace rcmk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rcmk
