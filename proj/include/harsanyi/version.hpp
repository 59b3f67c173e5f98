#pragma once

namespace harsanyi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace harsanyi
