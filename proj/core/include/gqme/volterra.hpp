#pragma once

// Continuous-time Nakajima-Zwanzig equation on fine uniform grids,
//
//   dU/dt = -i L_s U(t) + int_0^t K(tau) U(t - tau) dtau,
//
// solved in both directions with second-order (trapezoidal) quadrature.

#include <cstddef>

#include "gqme/errors.hpp"
#include "gqme/superop.hpp"

namespace gqme {

struct VolterraOptions {
    // Grid spacing above which extraction emits a "grid too coarse" warning.
    double coarse_grid_warning = 0.005;
};

// K(t) from densely sampled maps, via the second-kind Volterra equation
//   K(t) = U''(t) + i L_s U'(t) - int_0^t K(tau) U'(t - tau) dtau.
// K_0 comes from U''(0) - (-i L_s)^2.
KernelSeries extract_continuous_kernel(const MapTrajectory& fine, const Operator& h_s,
                                       const VolterraOptions& opts = {}, Warnings* warnings = nullptr);

// Forward solution of the integro-differential equation with an implicit
// trapezoidal step; returns U_0 ... U_{n_steps}.
MapTrajectory propagate_continuous(const KernelSeries& kc, const Operator& h_s, std::size_t n_steps);

struct PropagatorDerivatives {
    Superoperator first;
    Superoperator second;
    Superoperator third;
};

// One-sided second-order differences at t = 0 (3, 4 and 5 points).
PropagatorDerivatives derivatives_at_zero(const MapTrajectory& fine);

// Largest residual of the integro-differential equation on interior grid
// points, with central differences for dU/dt and a trapezoidal memory integral.
double continuous_residual(const MapTrajectory& traj, const KernelSeries& kc, const Operator& h_s);

} // namespace gqme
