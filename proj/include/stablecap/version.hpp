#pragma once

namespace stablecap {

inline constexpr const char* kVersion = "0.1.0";

} // namespace stablecap
