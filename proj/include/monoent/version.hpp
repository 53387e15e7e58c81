#pragma once

namespace monoent {
inline constexpr const char* kVersion = "0.1.0";
}
