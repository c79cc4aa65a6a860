#pragma once

namespace gfmlab {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace gfmlab
