#pragma once

// Spin-boson model ingredients:
//   H_s = eps sz + Omega sx,  coupling -sz sum_j c_j q_j,
//   J(w) = (pi/2) xi w^s / wc^(s-1) exp(-w / wc),
//   C(t) = (1/pi) int_0^inf J(w) [coth(beta w / 2) cos(w t) - i sin(w t)] dw.

#include <cstddef>
#include <span>
#include <vector>

#include "gqme/errors.hpp"
#include "gqme/superop.hpp"

namespace gqme {

struct SystemSpec {
    double epsilon = 0.0;
    double omega = 0.0;

    Operator hamiltonian() const { return two_level_hamiltonian(epsilon, omega); }
};

struct SpectralDensity {
    double xi = 0.0;      // Kondo parameter
    double s = 1.0;       // ohmicity exponent
    double omega_c = 1.0; // cutoff frequency
    double beta = 1.0;    // inverse temperature

    void validate() const;
};

// The parameters used throughout the benchmark: s = 1, wc = 5, xi = 0.3, beta = 5.
SpectralDensity benchmark_bath();
SystemSpec benchmark_system(); // eps = 0, Omega = -1

double spectral_density(double w, const SpectralDensity& sd);

// Adaptive Gauss-Kronrod over panels a few oscillations wide. Throws
// ConvergenceError if the error estimate exceeds rel_tol.
cplx bath_correlation(double t, const SpectralDensity& sd, double rel_tol = 1e-8);

struct ExpTerm {
    cplx alpha; // amplitude
    cplx nu;    // decay rate, Re(nu) > 0
};

struct ExpFit {
    std::vector<ExpTerm> terms;
    double relative_residual = 0.0; // max |C - fit| / max |C| over the fitted samples

    cplx evaluate(double t) const;
};

struct FitOptions {
    double sample_step = 0.01;
    // Weight on the t = 0 sample; keeps sum(alpha) pinned to C(0).
    double origin_weight = 100.0;
    int max_iterations = 400;
    int minimax_rounds = 12; // reweighting rounds toward the max-norm optimum
    double residual_threshold = 1e-3;
};

// Sum-of-exponentials fit to samples c[i] = C(i h): matrix pencil for the
// rates, linear least squares for the amplitudes, then Levenberg-Marquardt on
// all parameters with Re(nu) kept positive.
ExpFit fit_exponentials(std::span<const cplx> samples, double h, std::size_t n_terms, const FitOptions& opts = {});

// Samples C(t) on [0, horizon] and fits it. A residual above
// opts.residual_threshold is reported through warnings.
ExpFit fit_exponentials(const SpectralDensity& sd, std::size_t n_terms, double horizon, const FitOptions& opts = {},
                        Warnings* warnings = nullptr);

} // namespace gqme
