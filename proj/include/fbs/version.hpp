#pragma once

#define FBS_VERSION_MAJOR 0
#define FBS_VERSION_MINOR 1
#define FBS_VERSION_PATCH 0

namespace fbs {
inline constexpr const char* kVersion = "0.1.0";
}
