#pragma once

namespace hpg {
inline constexpr const char* kVersion = "0.1.0";
}
