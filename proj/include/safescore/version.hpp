#pragma once

namespace safescore {

inline constexpr const char* kVersion = "1.0.0";

// Bumped whenever the serialized model layout changes incompatibly.
inline constexpr const char* kModelFormatVersion = "1";

}  // namespace safescore
