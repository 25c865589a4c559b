#pragma once

// Discrete-time Nakajima-Zwanzig recursion (transfer tensors):
//
//   U_{N+1} = L U_N + dt^2 sum_{m=0}^{N} K_m U_{N-m},   L = I - i dt L_s.

#include <cstddef>
#include <optional>

#include "gqme/superop.hpp"

namespace gqme {

// Memory cutoff: kernels K_n with n > n_T are treated as zero.
class MemoryTruncation {
public:
    MemoryTruncation() = default;
    static MemoryTruncation none() { return {}; }
    static MemoryTruncation at(double t_mem);

    bool active() const { return t_mem_.has_value(); }
    std::optional<double> t_mem() const { return t_mem_; }
    // n_T = round(t_mem / dt), ties to even; nullopt when no cutoff is set.
    std::optional<std::size_t> steps(double dt) const;

private:
    std::optional<double> t_mem_;
};

// Solve the recursion for K_0 ... K_{M-1} given U_0 ... U_M.
KernelSeries extract_discrete_kernels(const MapTrajectory& traj, const Operator& h_s);

// Run the recursion for n_steps steps; returns U_0 ... U_{n_steps}.
MapTrajectory propagate_discrete(const KernelSeries& kernels, const Operator& h_s, std::size_t n_steps,
                                 const MemoryTruncation& trunc = {});

// rho_N = U_N rho_0 for every map of the trajectory.
StateSeries propagate_state(const MapTrajectory& traj, const DensityMatrix& rho0);
StateSeries propagate_state(const KernelSeries& kernels, const Operator& h_s, std::size_t n_steps,
                            const MemoryTruncation& trunc, const DensityMatrix& rho0);

} // namespace gqme
