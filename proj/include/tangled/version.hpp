#pragma once

namespace tangled {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tangled
