#pragma once

namespace gfmlab {

// Nominal angular frequency used throughout (rad/s). The truncated value is
// deliberate: it is the target constant of the frequency-error objective, so
// every default references the same literal rather than 100*pi.
inline constexpr double kOmegaNominal = 314.159;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace gfmlab
