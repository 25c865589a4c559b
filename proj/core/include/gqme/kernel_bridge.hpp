#pragma once

// Conversions between discrete kernels K_N (transfer tensors) and samples of
// the continuous memory kernel K(N dt).
//
//   FDIO : K_N = K(N dt) for all N.
//   TTM1 : K(0) = 2 K_0 - (-i L_s)^2,                         K(N dt) = K_N.
//   TTM2 : K(0) = 2 [K_0 - dt/6 U'''(0)] - (-i L_s)^2,         K(N dt) = K_N - dt/2 F_N,
//          with F(t) = {K(t), -i L_s} + int_0^t K(tau) K(t - tau) dtau.
//   MPDI : midpoint derivative / midpoint integral scheme built on
//          G_1 = exp(-i dt L_s) and G_1/2 = exp(-i dt L_s / 2).

#include <cstddef>
#include <string>

#include "gqme/discrete_gqme.hpp"
#include "gqme/superop.hpp"

namespace gqme {

enum class Scheme { FDIO, TTM1, TTM2, MPDI };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name); // "fdio", "ttm1", "ttm2", "mpdi"

// Quantities TTM2 needs beyond the kernels themselves. F_series lives on the
// same grid as the kernels it corrects.
struct AuxiliaryKernels {
    KernelSeries F_series;
    Superoperator dddot_U0 = Superoperator::Zero();
    Superoperator kdot0 = Superoperator::Zero();
};

// F(t) on the grid of a fine continuous kernel, trapezoidal convolution.
KernelSeries compute_F(const KernelSeries& kc_fine, const Operator& h_s);

// U'''(0) = (-i L_s)^3 + {K_0, -i L_s} + K'(0).
Superoperator dddot_U0(const Superoperator& k0, const Superoperator& kdot0, const Operator& h_s);

// (-3 K_0 + 4 K_1 - K_2) / (2 delta).
Superoperator kdot0_estimate(const KernelSeries& kc_fine);

// Every stride-th entry of a fine series; target_dt must be an integer
// multiple of the fine spacing. count = 0 keeps everything that fits.
KernelSeries sample_grid(const KernelSeries& fine, double target_dt, std::size_t count = 0);
MapTrajectory sample_grid(const MapTrajectory& fine, double target_dt, std::size_t count = 0);

// Builds F, K'(0) and U'''(0) from a fine continuous kernel and samples F
// onto target_dt.
AuxiliaryKernels make_auxiliary(const KernelSeries& kc_fine, const Operator& h_s, double target_dt);

KernelSeries discrete_to_continuous(const KernelSeries& kd, Scheme scheme, const Operator& h_s);
KernelSeries discrete_to_continuous(const KernelSeries& kd, Scheme scheme, const Operator& h_s,
                                    const AuxiliaryKernels& aux);

KernelSeries continuous_to_discrete(const KernelSeries& kc, Scheme scheme, const Operator& h_s);
KernelSeries continuous_to_discrete(const KernelSeries& kc, Scheme scheme, const Operator& h_s,
                                    const AuxiliaryKernels& aux);

// Normalization of the first MPD/I step. Literal keeps the printed factor 1/2
// on both T_1 and G_1 (T_1 = 2 U_1 - G_1, and the newest term of every later
// step carries weight 1/2). EndpointFullWeight drops the factor everywhere
// (T_1 = U_1 and U_N = sum_{m=1}^{N} T_m U_{N-m}).
enum class MpdiNormalization { Literal, EndpointFullWeight };

struct MpdiKernels {
    KernelSeries half;    // K((j + 1/2) dt), j = 0 ... M-1
    KernelSeries integer; // K(N dt); N >= 1 by averaging neighbours, N = 0 by linear extrapolation
};

MpdiKernels mpdi_extract(const MapTrajectory& traj, const Operator& h_s,
                         MpdiNormalization norm = MpdiNormalization::Literal);

MapTrajectory mpdi_propagate(const KernelSeries& kc_half, const Operator& h_s, std::size_t n_steps,
                             const MemoryTruncation& trunc = {},
                             MpdiNormalization norm = MpdiNormalization::Literal);

struct HalfGridSample {
    KernelSeries half;
    bool interpolated = false; // true when (j + 1/2) dt is not on the fine grid
};

// K((j + 1/2) dt) for j = 0 ... count-1, read off a fine continuous kernel.
HalfGridSample sample_half_grid(const KernelSeries& fine, double dt, std::size_t count);

} // namespace gqme
