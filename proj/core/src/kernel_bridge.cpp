#include "gqme/kernel_bridge.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gqme/errors.hpp"

namespace gqme {

namespace {

Superoperator minus_i_liouvillian(const Operator& h_s) { return cplx(0.0, -1.0) * commutator_superop(h_s); }

std::size_t grid_stride(double fine_dt, double target_dt)
{
    if (!(fine_dt > 0.0) || !(target_dt > 0.0)) throw ValidationError("time steps must be positive");
    const double ratio = target_dt / fine_dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
        throw ValidationError("grid spacing " + std::to_string(target_dt) + " is not an integer multiple of " +
                              std::to_string(fine_dt));
    return static_cast<std::size_t>(rounded);
}

void require_aux(const AuxiliaryKernels& aux, const KernelSeries& ks)
{
    if (std::abs(aux.F_series.dt - ks.dt) > 1e-12 * ks.dt)
        throw ValidationError("auxiliary F series grid does not match the kernel grid");
    if (aux.F_series.size() < ks.size())
        throw ValidationError("auxiliary F series is shorter than the kernel series");
}

} // namespace

const char* to_string(Scheme scheme)
{
    switch (scheme) {
    case Scheme::FDIO: return "fdio";
    case Scheme::TTM1: return "ttm1";
    case Scheme::TTM2: return "ttm2";
    case Scheme::MPDI: return "mpdi";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string& name)
{
    if (name == "fdio") return Scheme::FDIO;
    if (name == "ttm1") return Scheme::TTM1;
    if (name == "ttm2") return Scheme::TTM2;
    if (name == "mpdi") return Scheme::MPDI;
    throw ValidationError("unknown scheme '" + name + "' (expected fdio, ttm1, ttm2 or mpdi)");
}

KernelSeries compute_F(const KernelSeries& kc_fine, const Operator& h_s)
{
    if (kc_fine.kernels.empty()) throw ValidationError("compute_F: empty kernel series");
    if (kc_fine.kind != KernelKind::Continuous) throw ValidationError("compute_F needs a CONTINUOUS kernel");
    const Superoperator a = minus_i_liouvillian(h_s);
    const auto& k = kc_fine.kernels;
    const double h = kc_fine.dt;

    KernelSeries f{h, KernelKind::Continuous, {}};
    f.kernels.reserve(k.size());
    CompensatedSum conv;
    for (std::size_t n = 0; n < k.size(); ++n) {
        conv.reset();
        if (n > 0) {
            conv.add(0.5 * k[0] * k[n]);
            for (std::size_t m = 1; m < n; ++m) conv.add(k[m] * k[n - m]);
            conv.add(0.5 * k[n] * k[0]);
        }
        f.kernels.push_back(k[n] * a + a * k[n] + h * conv.value());
    }
    return f;
}

Superoperator dddot_U0(const Superoperator& k0, const Superoperator& kdot0, const Operator& h_s)
{
    const Superoperator a = minus_i_liouvillian(h_s);
    return a * a * a + (k0 * a + a * k0) + kdot0;
}

Superoperator kdot0_estimate(const KernelSeries& kc_fine)
{
    if (kc_fine.size() < 3) throw ValidationError("kdot0_estimate needs at least 3 grid points");
    const auto& k = kc_fine.kernels;
    return (-3.0 * k[0] + 4.0 * k[1] - k[2]) / (2.0 * kc_fine.dt);
}

KernelSeries sample_grid(const KernelSeries& fine, double target_dt, std::size_t count)
{
    if (fine.kind == KernelKind::ContinuousHalf) throw ValidationError("cannot stride-sample a half-grid series");
    const std::size_t stride = grid_stride(fine.dt, target_dt);
    const std::size_t available = (fine.size() + stride - 1) / stride;
    if (count == 0) count = available;
    if (count > available)
        throw ValidationError("fine series covers " + std::to_string(available) + " points at dt = " +
                              std::to_string(target_dt) + ", " + std::to_string(count) + " requested");
    KernelSeries out{fine.dt * static_cast<double>(stride), fine.kind, {}};
    out.kernels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.kernels.push_back(fine.kernels[i * stride]);
    return out;
}

MapTrajectory sample_grid(const MapTrajectory& fine, double target_dt, std::size_t count)
{
    const std::size_t stride = grid_stride(fine.dt, target_dt);
    const std::size_t available = (fine.size() + stride - 1) / stride;
    if (count == 0) count = available;
    if (count > available)
        throw ValidationError("fine trajectory covers " + std::to_string(available) + " points at dt = " +
                              std::to_string(target_dt) + ", " + std::to_string(count) + " requested");
    MapTrajectory out{fine.dt * static_cast<double>(stride), {}};
    out.maps.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.maps.push_back(fine.maps[i * stride]);
    return out;
}

AuxiliaryKernels make_auxiliary(const KernelSeries& kc_fine, const Operator& h_s, double target_dt)
{
    AuxiliaryKernels aux;
    aux.F_series = sample_grid(compute_F(kc_fine, h_s), target_dt);
    aux.kdot0 = kdot0_estimate(kc_fine);
    aux.dddot_U0 = dddot_U0(kc_fine.kernels.front(), aux.kdot0, h_s);
    return aux;
}

namespace {

KernelSeries d2c(const KernelSeries& kd, Scheme scheme, const Operator& h_s, const AuxiliaryKernels* aux)
{
    if (kd.kind != KernelKind::Discrete) throw ValidationError("discrete_to_continuous needs DISCRETE kernels");
    if (kd.kernels.empty()) throw ValidationError("discrete_to_continuous: empty kernel series");
    const Superoperator a = minus_i_liouvillian(h_s);
    const double dt = kd.dt;
    KernelSeries out{dt, KernelKind::Continuous, kd.kernels};

    switch (scheme) {
    case Scheme::FDIO: break;
    case Scheme::TTM1: out.kernels[0] = 2.0 * kd.kernels[0] - a * a; break;
    case Scheme::TTM2:
        if (!aux) throw ValidationError("TTM2 needs auxiliary kernels (F series and U'''(0))");
        require_aux(*aux, kd);
        out.kernels[0] = 2.0 * (kd.kernels[0] - (dt / 6.0) * aux->dddot_U0) - a * a;
        for (std::size_t n = 1; n < kd.size(); ++n)
            out.kernels[n] = kd.kernels[n] - (dt / 2.0) * aux->F_series.kernels[n];
        break;
    case Scheme::MPDI: throw ValidationError("MPD/I kernels come from mpdi_extract, not discrete_to_continuous");
    }
    return out;
}

KernelSeries c2d(const KernelSeries& kc, Scheme scheme, const Operator& h_s, const AuxiliaryKernels* aux)
{
    if (kc.kind != KernelKind::Continuous) throw ValidationError("continuous_to_discrete needs CONTINUOUS kernels");
    if (kc.kernels.empty()) throw ValidationError("continuous_to_discrete: empty kernel series");
    const Superoperator a = minus_i_liouvillian(h_s);
    const double dt = kc.dt;
    KernelSeries out{dt, KernelKind::Discrete, kc.kernels};

    switch (scheme) {
    case Scheme::FDIO: break;
    case Scheme::TTM1: out.kernels[0] = 0.5 * (kc.kernels[0] + a * a); break;
    case Scheme::TTM2:
        if (!aux) throw ValidationError("TTM2 needs auxiliary kernels (F series and U'''(0))");
        require_aux(*aux, kc);
        out.kernels[0] = 0.5 * (kc.kernels[0] + a * a) + (dt / 6.0) * aux->dddot_U0;
        for (std::size_t n = 1; n < kc.size(); ++n)
            out.kernels[n] = kc.kernels[n] + (dt / 2.0) * aux->F_series.kernels[n];
        break;
    case Scheme::MPDI: throw ValidationError("MPD/I propagation goes through mpdi_propagate");
    }
    return out;
}

} // namespace

KernelSeries discrete_to_continuous(const KernelSeries& kd, Scheme scheme, const Operator& h_s)
{
    return d2c(kd, scheme, h_s, nullptr);
}

KernelSeries discrete_to_continuous(const KernelSeries& kd, Scheme scheme, const Operator& h_s,
                                    const AuxiliaryKernels& aux)
{
    return d2c(kd, scheme, h_s, &aux);
}

KernelSeries continuous_to_discrete(const KernelSeries& kc, Scheme scheme, const Operator& h_s)
{
    return c2d(kc, scheme, h_s, nullptr);
}

KernelSeries continuous_to_discrete(const KernelSeries& kc, Scheme scheme, const Operator& h_s,
                                    const AuxiliaryKernels& aux)
{
    return c2d(kc, scheme, h_s, &aux);
}

MpdiKernels mpdi_extract(const MapTrajectory& traj, const Operator& h_s, MpdiNormalization norm)
{
    require_trajectory(traj, 3);
    const double dt = traj.dt;
    const Superoperator a = minus_i_liouvillian(h_s);
    const Superoperator g1 = expm(a, dt);
    const Superoperator gh = expm(a, 0.5 * dt);
    const auto gh_lu = gh.fullPivLu();
    if (gh_lu.rank() < 4) throw ValidationError("G_1/2 is singular");

    const auto& u = traj.maps;
    const std::size_t m_count = traj.size() - 1;
    const double weight = norm == MpdiNormalization::Literal ? 2.0 : 1.0;

    std::vector<Superoperator> t(m_count + 1, Superoperator::Zero());
    t[1] = norm == MpdiNormalization::Literal ? Superoperator(2.0 * u[1] - g1) : Superoperator(u[1]);
    CompensatedSum conv;
    for (std::size_t n = 2; n <= m_count; ++n) {
        conv.reset();
        for (std::size_t m = 1; m < n; ++m) conv.add(t[n - m] * u[m]);
        t[n] = weight * (u[n] - conv.value());
    }

    MpdiKernels out;
    out.half = KernelSeries{dt, KernelKind::ContinuousHalf, {}};
    out.half.kernels.reserve(m_count);
    const double dt2 = dt * dt;
    for (std::size_t n = 1; n <= m_count; ++n) {
        const Superoperator rhs = n == 1 ? Superoperator(t[1] - g1) : t[n];
        out.half.kernels.push_back(gh_lu.solve(rhs) / dt2);
    }

    out.integer = KernelSeries{dt, KernelKind::Continuous, {}};
    const auto& kh = out.half.kernels;
    if (kh.size() >= 2) {
        out.integer.kernels.reserve(kh.size());
        out.integer.kernels.push_back(0.5 * (3.0 * kh[0] - kh[1]));
        for (std::size_t n = 1; n < kh.size(); ++n) out.integer.kernels.push_back(0.5 * (kh[n - 1] + kh[n]));
    }
    return out;
}

MapTrajectory mpdi_propagate(const KernelSeries& kc_half, const Operator& h_s, std::size_t n_steps,
                             const MemoryTruncation& trunc, MpdiNormalization norm)
{
    if (kc_half.kind != KernelKind::ContinuousHalf) throw ValidationError("mpdi_propagate needs CONTINUOUS_HALF kernels");
    if (!(kc_half.dt > 0.0)) throw ValidationError("kernel time step must be positive");
    if (n_steps < 1) throw ValidationError("n_steps must be at least 1");

    const double dt = kc_half.dt;
    const auto n_t = trunc.steps(dt);
    const std::size_t t_max = n_t ? std::min(*n_t, n_steps) : n_steps;
    if (kc_half.size() < t_max)
        throw ValidationError("missing half-grid kernel values: have " + std::to_string(kc_half.size()) + ", need " +
                              std::to_string(t_max));

    const Superoperator a = minus_i_liouvillian(h_s);
    const Superoperator g1 = expm(a, dt);
    const Superoperator gh = expm(a, 0.5 * dt);
    const double dt2 = dt * dt;

    // T_0 is unused; T_N = 0 beyond the memory cutoff.
    std::vector<Superoperator> t(t_max + 1, Superoperator::Zero());
    for (std::size_t n = 1; n <= t_max; ++n) t[n] = dt2 * gh * kc_half.kernels[n - 1];
    t[1] += g1;

    const double newest = norm == MpdiNormalization::Literal ? 0.5 : 1.0;
    MapTrajectory traj{dt, {}};
    traj.maps.reserve(n_steps + 1);
    traj.maps.push_back(Superoperator::Identity());
    CompensatedSum conv;
    for (std::size_t n = 1; n <= n_steps; ++n) {
        conv.reset();
        for (std::size_t m = (n > t_max ? n - t_max : 1); m < n; ++m) conv.add(t[n - m] * traj.maps[m]);
        if (n <= t_max) conv.add(newest * t[n]);
        if (n == 1 && norm == MpdiNormalization::Literal) conv.add(0.5 * g1);
        traj.maps.push_back(conv.value());
    }
    return traj;
}

HalfGridSample sample_half_grid(const KernelSeries& fine, double dt, std::size_t count)
{
    if (fine.kind != KernelKind::Continuous) throw ValidationError("half-grid sampling needs a CONTINUOUS kernel");
    if (!(fine.dt > 0.0) || !(dt > 0.0)) throw ValidationError("time steps must be positive");
    HalfGridSample out;
    out.half = KernelSeries{dt, KernelKind::ContinuousHalf, {}};
    out.half.kernels.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double pos = (static_cast<double>(j) + 0.5) * dt / fine.dt;
        const double nearest = std::round(pos);
        if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, pos)) {
            const auto i = static_cast<std::size_t>(nearest);
            if (i >= fine.size()) throw ValidationError("missing half-grid kernel values beyond fine kernel horizon");
            out.half.kernels.push_back(fine.kernels[i]);
        } else {
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            if (lo + 1 >= fine.size()) throw ValidationError("missing half-grid kernel values beyond fine kernel horizon");
            const double w = pos - static_cast<double>(lo);
            out.half.kernels.push_back((1.0 - w) * fine.kernels[lo] + w * fine.kernels[lo + 1]);
            out.interpolated = true;
        }
    }
    return out;
}

} // namespace gqme
