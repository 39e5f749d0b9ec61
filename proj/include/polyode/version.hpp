#pragma once

namespace polyode {
inline constexpr const char* kVersion = "0.1.0";
}
