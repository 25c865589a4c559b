#pragma once

// Independent references for the spin-boson model built from a finite
// discretization of J(w): exact diagonalization of system + truncated bath,
// the analytic pure-dephasing solution, and the t = 0 memory kernel in
// projector form, K_0 = -Tr_b[L (1 - P) L rho_b] with P(.) = rho_b (x) Tr_b(.).

#include <cstddef>
#include <vector>

#include "gqme/bath.hpp"
#include "gqme/superop.hpp"

namespace gqme {

// Harmonic modes with mass-weighted coordinates: H_b = sum_j (p_j^2 + w_j^2 q_j^2) / 2,
// coupling -sz sum_j c_j q_j, J(w) = (pi/2) sum_j c_j^2 / w_j delta(w - w_j).
struct DiscreteBath {
    std::vector<double> omega;
    std::vector<double> coupling;

    std::size_t size() const { return omega.size(); }
};

struct DiscretizationOptions {
    // Lowest log-grid edge as a fraction of omega_c; [0, edge] is lumped into
    // one mode. 0 picks min(0.05, 3 / n_modes), balancing the error of the
    // lumped cell against recurrences from the grid spacing.
    double low_edge = 0.0;
    // Upper edge as a multiple of omega_c.
    double high_edge = 10.0;
};

// Cells: [0, w_lo] and a geometric grid on [w_lo, high_edge * wc]. Each cell
// carries the weight of J(w)/w on it, placed at the J-weighted mean
// frequency, so sum_j c_j^2 / (2 w_j^2) equals the reorganization integral.
DiscreteBath discretize_bath(const SpectralDensity& sd, std::size_t n_modes, const DiscretizationOptions& opts = {});

struct FockPolicy {
    std::size_t cutoff = 4;       // levels per mode (minimum when thermal is on)
    bool thermal = false;         // raise per-mode cutoffs until the thermal tail is below tail_tol
    double tail_tol = 1e-7;
    std::size_t max_cutoff = 400;
};

std::vector<std::size_t> fock_cutoffs(const DiscreteBath& bath, double beta, const FockPolicy& policy);

struct ExactDiagOptions {
    FockPolicy fock;
    DiscretizationOptions grid;
    std::size_t max_dimension = 1500; // system (x) bath Hilbert dimension budget (non-factorized path)
    bool factorize = true;            // use the per-mode factorization when Omega = 0
};

// Exact dynamics from rho_s (x) rho_thermal. With Omega = 0 the two sz
// branches factorize over modes and each mode is diagonalized on its own;
// otherwise the full truncated Hilbert space is diagonalized.
MapTrajectory exact_diag_reference(const SystemSpec& sys, const DiscreteBath& bath, double beta, double dt,
                                   std::size_t n_steps, const ExactDiagOptions& opts = {});
MapTrajectory exact_diag_reference(const SystemSpec& sys, const SpectralDensity& sd, std::size_t n_modes,
                                   std::size_t fock_cutoff, double dt, std::size_t n_steps,
                                   const ExactDiagOptions& opts = {});

// Omega = 0: populations frozen, rho_01(t) = rho_01(0) exp(-2 i eps t) exp(-Gamma(t)),
// Gamma(t) = (4/pi) int J(w) coth(beta w / 2) (1 - cos w t) / w^2 dw.
double dephasing_exponent(double t, const SpectralDensity& sd);
double dephasing_exponent(double t, const DiscreteBath& bath, double beta);

MapTrajectory pure_dephasing_analytic(const SystemSpec& sys, const SpectralDensity& sd, double dt, std::size_t n_steps);
MapTrajectory pure_dephasing_analytic(const SystemSpec& sys, const DiscreteBath& bath, double beta, double dt,
                                      std::size_t n_steps);

struct K0Options {
    FockPolicy fock;
    DiscretizationOptions grid;
    std::size_t max_dimension = 600; // full-space evaluation budget
    // When the full space is over budget, sum single-mode contributions
    // (exact: cross terms carry <q_j> = 0). Otherwise throw BudgetError.
    bool allow_mode_sum = true;
};

Superoperator k0_projector(const SystemSpec& sys, const DiscreteBath& bath, double beta, const K0Options& opts = {});
Superoperator k0_projector(const SystemSpec& sys, const SpectralDensity& sd, std::size_t n_modes,
                           std::size_t fock_cutoff, const K0Options& opts = {});

// Mode-by-mode evaluation of the same quantity (always allowed).
Superoperator k0_projector_mode_sum(const SystemSpec& sys, const DiscreteBath& bath, double beta,
                                    const FockPolicy& fock);

} // namespace gqme
