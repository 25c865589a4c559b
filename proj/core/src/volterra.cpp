#include "gqme/volterra.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gqme {

namespace {

std::vector<Superoperator> first_derivative(const std::vector<Superoperator>& u, double h)
{
    const std::size_t n = u.size();
    std::vector<Superoperator> d(n);
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    return d;
}

std::vector<Superoperator> second_derivative(const std::vector<Superoperator>& u, double h)
{
    const std::size_t n = u.size();
    const double h2 = h * h;
    std::vector<Superoperator> d(n);
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    return d;
}

} // namespace

PropagatorDerivatives derivatives_at_zero(const MapTrajectory& fine)
{
    require_trajectory(fine, 5);
    const auto& u = fine.maps;
    const double h = fine.dt;
    PropagatorDerivatives d;
    d.first = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d.second = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h);
    d.third = (-5.0 * u[0] + 18.0 * u[1] - 24.0 * u[2] + 14.0 * u[3] - 3.0 * u[4]) / (2.0 * h * h * h);
    return d;
}

KernelSeries extract_continuous_kernel(const MapTrajectory& fine, const Operator& h_s, const VolterraOptions& opts,
                                       Warnings* warnings)
{
    require_trajectory(fine, 5);
    const double h = fine.dt;
    if (h > opts.coarse_grid_warning)
        warn(warnings, "volterra extraction on a coarse grid (dt = " + std::to_string(h) +
                           "); second-order error may dominate");

    const Superoperator minus_i_ls = cplx(0.0, -1.0) * commutator_superop(h_s);
    const auto du = first_derivative(fine.maps, h);
    const auto ddu = second_derivative(fine.maps, h);
    const std::size_t n = fine.size();

    KernelSeries out{h, KernelKind::Continuous, {}};
    out.kernels.reserve(n);
    out.kernels.push_back(ddu[0] - minus_i_ls * minus_i_ls);

    // dU/dt at tau = 0 is exactly -i L_s; the implicit trapezoid end weight
    // multiplies K_n from the right.
    const Superoperator du0 = minus_i_ls;
    const Superoperator diag = Superoperator::Identity() + 0.5 * h * du0;
    const auto diag_t_lu = diag.transpose().partialPivLu();

    CompensatedSum conv;
    for (std::size_t k = 1; k < n; ++k) {
        conv.reset();
        conv.add(0.5 * out.kernels[0] * du[k]);
        for (std::size_t m = 1; m < k; ++m) conv.add(out.kernels[m] * du[k - m]);
        const Superoperator rhs = ddu[k] - minus_i_ls * du[k] - h * conv.value();
        out.kernels.push_back(diag_t_lu.solve(rhs.transpose()).transpose());
    }
    return out;
}

MapTrajectory propagate_continuous(const KernelSeries& kc, const Operator& h_s, std::size_t n_steps)
{
    if (kc.kind != KernelKind::Continuous) throw ValidationError("propagate_continuous needs CONTINUOUS kernels");
    if (!(kc.dt > 0.0)) throw ValidationError("kernel time step must be positive");
    if (kc.size() < n_steps + 1)
        throw ValidationError("requested horizon of " + std::to_string(n_steps) + " steps exceeds kernel data (" +
                              std::to_string(kc.size()) + " points)");

    const double h = kc.dt;
    const Superoperator minus_i_ls = cplx(0.0, -1.0) * commutator_superop(h_s);
    const auto& k = kc.kernels;

    MapTrajectory traj{h, {}};
    traj.maps.reserve(n_steps + 1);
    traj.maps.push_back(Superoperator::Identity());
    std::vector<Superoperator> f;
    f.reserve(n_steps + 1);
    f.push_back(minus_i_ls);

    const Superoperator implicit = Superoperator::Identity() - 0.5 * h * (minus_i_ls + 0.5 * h * k[0]);
    const auto implicit_lu = implicit.partialPivLu();

    CompensatedSum conv;
    for (std::size_t n = 0; n < n_steps; ++n) {
        // Memory terms of f_{n+1} that do not involve U_{n+1}.
        conv.reset();
        for (std::size_t m = 1; m <= n; ++m) conv.add(k[m] * traj.maps[n + 1 - m]);
        conv.add(0.5 * k[n + 1]);
        const Superoperator explicit_part = h * conv.value();

        const Superoperator rhs = traj.maps[n] + 0.5 * h * (f[n] + explicit_part);
        const Superoperator next = implicit_lu.solve(rhs);
        traj.maps.push_back(next);
        f.push_back((minus_i_ls + 0.5 * h * k[0]) * next + explicit_part);
    }
    return traj;
}

double continuous_residual(const MapTrajectory& traj, const KernelSeries& kc, const Operator& h_s)
{
    require_trajectory(traj, 3);
    if (kc.size() < traj.size()) throw ValidationError("kernel series shorter than trajectory");
    const double h = traj.dt;
    const Superoperator minus_i_ls = cplx(0.0, -1.0) * commutator_superop(h_s);
    const auto& u = traj.maps;
    const auto& k = kc.kernels;
    double worst = 0.0;
    for (std::size_t n = 1; n + 1 < traj.size(); ++n) {
        CompensatedSum conv;
        conv.add(0.5 * k[0] * u[n]);
        for (std::size_t m = 1; m < n; ++m) conv.add(k[m] * u[n - m]);
        conv.add(0.5 * k[n]);
        const Superoperator du = (u[n + 1] - u[n - 1]) / (2.0 * h);
        worst = std::max(worst, (du - minus_i_ls * u[n] - h * conv.value()).norm());
    }
    return worst;
}

} // namespace gqme
