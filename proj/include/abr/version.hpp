#pragma once

#define ABR_VERSION "0.1.0"

namespace abr {
inline constexpr const char* version = ABR_VERSION;
}
