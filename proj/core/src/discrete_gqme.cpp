#include "gqme/discrete_gqme.hpp"

#include <cmath>
#include <string>

#include "gqme/errors.hpp"

namespace gqme {

MemoryTruncation MemoryTruncation::at(double t_mem)
{
    if (!(t_mem > 0.0) || !std::isfinite(t_mem)) throw ValidationError("memory cutoff t_mem must be positive");
    MemoryTruncation m;
    m.t_mem_ = t_mem;
    return m;
}

std::optional<std::size_t> MemoryTruncation::steps(double dt) const
{
    if (!t_mem_) return std::nullopt;
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
    // nearbyint honours the default round-half-to-even mode.
    const double n = std::nearbyint(*t_mem_ / dt);
    if (n < 1.0) throw ValidationError("memory cutoff shorter than one time step");
    return static_cast<std::size_t>(n);
}

KernelSeries extract_discrete_kernels(const MapTrajectory& traj, const Operator& h_s)
{
    require_trajectory(traj, 2);
    const double dt = traj.dt;
    const double dt2 = dt * dt;
    const Superoperator minus_i_ls = cplx(0.0, -1.0) * commutator_superop(h_s);
    const Superoperator lmat = Superoperator::Identity() + dt * minus_i_ls;

    const std::size_t m_count = traj.size() - 1;
    KernelSeries out{dt, KernelKind::Discrete, {}};
    out.kernels.reserve(m_count);

    CompensatedSum conv;
    for (std::size_t n = 0; n < m_count; ++n) {
        conv.reset();
        for (std::size_t m = 0; m < n; ++m) conv.add(out.kernels[m] * traj.maps[n - m]);
        const Superoperator rhs = traj.maps[n + 1] - lmat * traj.maps[n];
        // U_0 = I, so the K_N coefficient is the identity.
        out.kernels.push_back(rhs / dt2 - conv.value());
    }
    return out;
}

MapTrajectory propagate_discrete(const KernelSeries& kernels, const Operator& h_s, std::size_t n_steps,
                                 const MemoryTruncation& trunc)
{
    if (kernels.kind != KernelKind::Discrete) throw ValidationError("propagate_discrete needs DISCRETE kernels");
    if (!(kernels.dt > 0.0)) throw ValidationError("kernel time step must be positive");
    if (n_steps < 1) throw ValidationError("n_steps must be at least 1");

    const double dt = kernels.dt;
    const double dt2 = dt * dt;
    const auto n_t = trunc.steps(dt);
    // The recursion for U_{N+1} reads K_0..K_N; across the run that is K_0..K_{n_steps-1}.
    const std::size_t needed = n_t ? std::min(*n_t + 1, n_steps) : n_steps;
    if (kernels.size() < needed)
        throw ValidationError("kernel series has " + std::to_string(kernels.size()) + " entries, propagation needs " +
                              std::to_string(needed));

    const Superoperator lmat = Superoperator::Identity() + dt * (cplx(0.0, -1.0) * commutator_superop(h_s));
    MapTrajectory traj{dt, {}};
    traj.maps.reserve(n_steps + 1);
    traj.maps.push_back(Superoperator::Identity());

    CompensatedSum conv;
    for (std::size_t n = 0; n < n_steps; ++n) {
        const std::size_t m_max = n_t ? std::min(n, *n_t) : n;
        conv.reset();
        for (std::size_t m = 0; m <= m_max; ++m) conv.add(kernels.kernels[m] * traj.maps[n - m]);
        traj.maps.push_back(lmat * traj.maps[n] + dt2 * conv.value());
    }
    return traj;
}

StateSeries propagate_state(const MapTrajectory& traj, const DensityMatrix& rho0)
{
    const LiouvilleVector v0 = vectorize(rho0);
    StateSeries out;
    out.reserve(traj.size());
    for (const auto& u : traj.maps) out.push_back(devectorize(u * v0));
    return out;
}

StateSeries propagate_state(const KernelSeries& kernels, const Operator& h_s, std::size_t n_steps,
                            const MemoryTruncation& trunc, const DensityMatrix& rho0)
{
    return propagate_state(propagate_discrete(kernels, h_s, n_steps, trunc), rho0);
}

} // namespace gqme
