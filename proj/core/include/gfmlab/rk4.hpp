#pragma once

#include <array>
#include <cstddef>
#include <utility>

namespace gfmlab {

// One classical 4th-order Runge-Kutta step for a small fixed-size state.
// `deriv(t, y)` returns dy/dt as the same array type.
template <std::size_t N, typename Deriv>
std::array<double, N> rk4_step(const std::array<double, N>& y, double t, double dt, Deriv&& deriv) {
    const auto k1 = deriv(t, y);

    std::array<double, N> tmp;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    const auto k2 = deriv(t + 0.5 * dt, tmp);

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    const auto k3 = deriv(t + 0.5 * dt, tmp);

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * k3[i];
    const auto k4 = deriv(t + dt, tmp);

    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = y[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

}  // namespace gfmlab
