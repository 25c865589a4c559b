#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gqme/bath.hpp"
#include "gqme/errors.hpp"
#include "gqme/exact_diag.hpp"
#include "gqme/heom.hpp"
#include "test_support.hpp"

using namespace gqme;
using namespace gqme::testing;

namespace {

// Ohmic (s = 1) closed forms from coth(x) = 1 + 2 sum_n exp(-2 n x); the
// tail of each series is replaced by its integral from N + 1/2.
cplx ohmic_correlation_series(double t, const SpectralDensity& sd)
{
    const double a0 = 1.0 / sd.omega_c;
    cplx sum = 1.0 / ((a0 + cplx(0.0, t)) * (a0 + cplx(0.0, t)));
    const int n_max = 20000;
    double thermal = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double a = a0 + n * sd.beta;
        thermal += (a * a - t * t) / ((a * a + t * t) * (a * a + t * t));
    }
    const double a_tail = a0 + (n_max + 0.5) * sd.beta;
    thermal += (1.0 / (sd.beta * (a_tail + cplx(0.0, t)))).real();
    return 0.5 * sd.xi * (sum + 2.0 * thermal);
}

double ohmic_dephasing_series(double t, const SpectralDensity& sd)
{
    const double a0 = 1.0 / sd.omega_c;
    const int n_max = 20000;
    double thermal = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double a = a0 + n * sd.beta;
        thermal += std::log1p(t * t / (a * a));
    }
    const double a_tail = a0 + (n_max + 0.5) * sd.beta;
    thermal += t * t / (sd.beta * a_tail);
    return sd.xi * (std::log1p(sd.omega_c * sd.omega_c * t * t) + 2.0 * thermal);
}

// Coherence exp(-Gamma(t)) with Gamma(t) = 4 Re sum_k alpha_k (nu_k t - 1 + exp(-nu_k t)) / nu_k^2,
// the pure-dephasing solution for a bath whose C(t) is exactly the fit.
double fit_coherence(const ExpFit& fit, double t)
{
    cplx g = 0.0;
    for (const auto& term : fit.terms)
        g += term.alpha * (term.nu * t - 1.0 + std::exp(-term.nu * t)) / (term.nu * term.nu);
    return std::exp(-4.0 * g.real());
}

Superoperator closed_map(const SystemSpec& sys, double t)
{
    return expm(cplx(0.0, -1.0) * commutator_superop(sys.hamiltonian()), t);
}

double max_closed_error(const MapTrajectory& traj, const SystemSpec& sys)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n)
        worst = std::max(worst, max_abs(traj.maps[n] - closed_map(sys, traj.time(n))));
    return worst;
}

// Largest deviation of U(rho01 basis) from the given coherence curve; the
// dephasing maps act diagonally on the Liouville basis.
template <typename F>
double max_coherence_error(const MapTrajectory& traj, double epsilon, F coherence)
{
    double worst = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const double t = traj.time(n);
        const cplx expected = std::exp(cplx(0.0, -2.0 * epsilon * t)) * coherence(t);
        // vec index 2 holds the (0,1) entry.
        worst = std::max(worst, std::abs(traj.maps[n](2, 2) - expected));
        worst = std::max(worst, std::abs(traj.maps[n](1, 1) - std::conj(expected)));
        worst = std::max(worst, std::abs(traj.maps[n](0, 0) - 1.0));
        worst = std::max(worst, std::abs(traj.maps[n](3, 3) - 1.0));
    }
    return worst;
}

bool preserves_hermiticity(const Superoperator& u, std::mt19937_64& rng)
{
    const Operator x = random_hermitian(rng);
    const Operator y = devectorize(u * vectorize(x));
    return (y - y.adjoint()).cwiseAbs().maxCoeff() < 1e-10;
}

} // namespace

TEST_CASE("spectral density values and validation")
{
    const SpectralDensity sd = benchmark_bath();
    CHECK(spectral_density(0.0, sd) == 0.0);
    CHECK(spectral_density(5.0, sd) == doctest::Approx(0.5 * std::numbers::pi * 0.3 * 5.0 * std::exp(-1.0)));
    // Ohmic J peaks at the cutoff.
    CHECK(spectral_density(5.0, sd) > spectral_density(4.9, sd));
    CHECK(spectral_density(5.0, sd) > spectral_density(5.1, sd));
    SpectralDensity sub = sd;
    sub.s = 0.5;
    CHECK(spectral_density(2.0, sub) == doctest::Approx(0.5 * std::numbers::pi * 0.3 * std::pow(2.0, 0.5) *
                                                        std::pow(5.0, 0.5) * std::exp(-0.4)));
    SpectralDensity bad = sd;
    bad.beta = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = sd;
    bad.omega_c = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("bath correlation matches the ohmic series")
{
    const SpectralDensity sd = benchmark_bath();
    CHECK(bath_correlation(0.0, sd).real() == doctest::Approx(3.76864454).epsilon(1e-8));
    CHECK(std::abs(bath_correlation(0.0, sd).imag()) < 1e-12);
    for (double t : {0.0, 0.05, 0.3, 1.0, 2.5, 7.0}) {
        const cplx c = bath_correlation(t, sd);
        const cplx ref = ohmic_correlation_series(t, sd);
        CHECK(std::abs(c - ref) < 1e-7 * std::abs(bath_correlation(0.0, sd)));
    }
    SpectralDensity hot = sd;
    hot.beta = 0.5;
    for (double t : {0.0, 0.4, 3.0})
        CHECK(std::abs(bath_correlation(t, hot) - ohmic_correlation_series(t, hot)) < 1e-7 * std::abs(bath_correlation(0.0, hot)));
    SpectralDensity off = sd;
    off.xi = 0.0;
    CHECK(std::abs(bath_correlation(1.0, off)) == 0.0);
}

TEST_CASE("exponential fit recovers a synthetic sum of exponentials")
{
    const double h = 0.01;
    std::vector<cplx> samples(1001);
    const cplx a1{1.5, -0.3}, n1{0.8, 2.0}, a2{0.4, 0.0}, n2{3.0, 0.0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double t = h * static_cast<double>(i);
        samples[i] = a1 * std::exp(-n1 * t) + a2 * std::exp(-n2 * t);
    }
    const ExpFit fit = fit_exponentials(samples, h, 2);
    CHECK(fit.relative_residual < 1e-8);
    for (double t : {0.0, 1.3, 9.0, 15.0}) CHECK(std::abs(fit.evaluate(t) - a1 * std::exp(-n1 * t) - a2 * std::exp(-n2 * t)) < 1e-7);
    for (const auto& term : fit.terms) CHECK(term.nu.real() > 0.0);
    CHECK_THROWS_AS(fit_exponentials(std::span<const cplx>(samples.data(), 4), h, 2), ValidationError);
    CHECK_THROWS_AS(fit_exponentials(samples, h, 0), ValidationError);
}

TEST_CASE("benchmark bath fit residuals")
{
    const SpectralDensity sd = benchmark_bath();
    Warnings warnings;
    const ExpFit k3 = fit_exponentials(sd, 3, 10.0, {}, &warnings);
    CHECK(k3.relative_residual <= 1e-2);
    CHECK(warnings.size() == 1); // above the default 1e-3 threshold
    const ExpFit k7 = fit_exponentials(sd, 7, 10.0);
    CHECK(k7.relative_residual <= 1e-3);
    double previous = 1e300;
    for (std::size_t k : {2u, 3u, 5u, 7u}) {
        const ExpFit f = fit_exponentials(sd, k, 10.0);
        CHECK(f.relative_residual < previous);
        previous = f.relative_residual;
        for (const auto& term : f.terms) CHECK(term.nu.real() > 0.0);
        // The residual is an honest max over the fitted window.
        double worst = 0.0;
        for (double t = 0.0; t <= 10.0; t += 0.25) worst = std::max(worst, std::abs(f.evaluate(t) - bath_correlation(t, sd)));
        CHECK(worst <= f.relative_residual * std::abs(bath_correlation(0.0, sd)) * (1.0 + 1e-6) + 1e-9);
    }
}

TEST_CASE("HEOM modes and truncation")
{
    ExpFit fit;
    fit.terms = {{cplx(1.0, 0.0), cplx(1.0, 0.0)}, {cplx(0.5, 0.2), cplx(4.0, 3.0)}};
    const auto modes = heom_modes(fit);
    // The real rate merges its C and C* modes; the complex one does not.
    REQUIRE(modes.size() == 3);
    CHECK(std::abs(modes[0].eta - 1.0) < 1e-15);
    CHECK(std::abs(modes[0].eta_bar - 1.0) < 1e-15);

    HeomConfig per_mode;
    per_mode.truncation = PerModeDepth{20, 8};
    const auto caps = mode_depths(modes, per_mode);
    CHECK(caps[0] == 20);
    CHECK(caps[1] == 8); // floor(20 * 1 / 4) = 5 is raised to L_min
    CHECK(caps[2] == 8);
    per_mode.truncation = PerModeDepth{20, 2};
    CHECK(mode_depths(modes, per_mode)[1] == 5);

    HeomConfig total;
    total.truncation = TotalDepth{4};
    // Compositions of at most 4 quanta over 3 modes: C(7, 3).
    CHECK(heom_hierarchy_size(fit, total) == 35);
    total.max_ados = 34;
    CHECK_THROWS_AS(HeomGenerator(benchmark_system(), fit, total), BudgetError);
    total.truncation = TotalDepth{0};
    CHECK_THROWS_AS(heom_hierarchy_size(fit, total), ValidationError);

    ExpFit growing;
    growing.terms = {{cplx(1.0, 0.0), cplx(-0.1, 0.0)}};
    CHECK_THROWS_AS(heom_modes(growing), ValidationError);
}

TEST_CASE("HEOM without coupling is closed dynamics")
{
    const SystemSpec sys{0.3, -1.0};
    HeomConfig cfg;
    cfg.truncation = TotalDepth{3};
    // Only the RK4 truncation error remains: fourth order in the step.
    const double coarse = max_closed_error(heom_propagate(sys, ExpFit{}, cfg, 0.02, 100), sys);
    const double fine = max_closed_error(heom_propagate(sys, ExpFit{}, cfg, 0.01, 200), sys);
    CHECK(coarse / fine == doctest::Approx(16.0).epsilon(0.1));
    CHECK(fine < 1e-8);
}

TEST_CASE("HEOM pure dephasing matches the fit-exact solution")
{
    const SpectralDensity sd = benchmark_bath();
    const ExpFit fit = fit_exponentials(sd, 3, 5.0);
    const SystemSpec sys{0.5, 0.0};
    double previous = 1e300;
    for (int depth : {2, 4, 6}) {
        HeomConfig cfg;
        cfg.truncation = TotalDepth{depth};
        cfg.step = 0.005;
        const MapTrajectory traj = heom_propagate(sys, fit, cfg, 0.02, 100);
        const double err = max_coherence_error(traj, sys.epsilon, [&](double t) { return fit_coherence(fit, t); });
        CHECK(err < previous);
        previous = err;
        if (depth == 6) CHECK(err < 1e-4);
    }
}

TEST_CASE("HEOM maps preserve trace and Hermiticity")
{
    const ExpFit fit = fit_exponentials(benchmark_bath(), 2, 5.0);
    HeomConfig cfg;
    cfg.truncation = TotalDepth{4};
    const MapTrajectory traj = heom_propagate(benchmark_system(), fit, cfg, 0.01, 100);
    CHECK(max_trace_defect(traj) < 1e-12);
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 37u, 100u}) CHECK(preserves_hermiticity(traj.maps[n], rng));
    // Populations move: the map is not the closed one.
    CHECK(max_closed_error(traj, benchmark_system()) > 1e-3);
}

TEST_CASE("bath discretization")
{
    const SpectralDensity sd = benchmark_bath();
    const DiscreteBath bath = discretize_bath(sd, 40);
    REQUIRE(bath.size() == 40);
    // Reorganization: sum c^2 / (2 w^2) = (1/pi) int J / w, = xi wc / 2 for the ohmic bath up to the cut.
    double reorg = 0.0;
    for (std::size_t j = 0; j < bath.size(); ++j) {
        CHECK(bath.omega[j] > 0.0);
        reorg += bath.coupling[j] * bath.coupling[j] / (2.0 * bath.omega[j] * bath.omega[j]);
    }
    CHECK(reorg == doctest::Approx(0.5 * sd.xi * sd.omega_c * (1.0 - std::exp(-10.0))).epsilon(1e-8));
    CHECK(discretize_bath(sd, 0).size() == 0);
    DiscretizationOptions bad;
    bad.low_edge = 20.0;
    CHECK_THROWS_AS(discretize_bath(sd, 10, bad), ValidationError);
}

TEST_CASE("dephasing exponent matches the ohmic series")
{
    const SpectralDensity sd = benchmark_bath();
    CHECK(dephasing_exponent(0.0, sd) == 0.0);
    for (double t : {0.1, 0.7, 2.0, 6.0}) CHECK(dephasing_exponent(t, sd) == doctest::Approx(ohmic_dephasing_series(t, sd)).epsilon(1e-7));

    // Short times: Gamma ~ 2 Re C(0) t^2.
    const double t = 1e-3;
    CHECK(dephasing_exponent(t, sd) == doctest::Approx(2.0 * bath_correlation(0.0, sd).real() * t * t).epsilon(1e-4));

    const SystemSpec driven{0.0, -1.0};
    CHECK_THROWS_AS(pure_dephasing_analytic(driven, sd, 0.1, 10), ValidationError);

    SpectralDensity off = sd;
    off.xi = 0.0;
    const SystemSpec sys{0.4, 0.0};
    CHECK(max_closed_error(pure_dephasing_analytic(sys, off, 0.05, 40), sys) < 1e-13);
}

TEST_CASE("exact diagonalization: trivial limits")
{
    const SystemSpec sys{0.2, -1.0};
    const SpectralDensity sd = benchmark_bath();
    CHECK(max_closed_error(exact_diag_reference(sys, DiscreteBath{}, sd.beta, 0.05, 40), sys) < 1e-12);

    const DiscreteBath decoupled{{1.3}, {0.0}};
    CHECK(max_closed_error(exact_diag_reference(sys, decoupled, sd.beta, 0.05, 40), sys) < 1e-12);
    const SystemSpec dephasing{0.2, 0.0};
    CHECK(max_closed_error(exact_diag_reference(dephasing, decoupled, sd.beta, 0.05, 40), dephasing) < 1e-12);
}

TEST_CASE("exact diagonalization: single mode pins the dephasing prefactor")
{
    const SystemSpec sys{0.3, 0.0};
    const double beta = 2.0;
    const DiscreteBath bath{{1.7}, {0.9}};
    ExactDiagOptions opts;
    opts.fock.thermal = true;
    opts.fock.tail_tol = 1e-12;
    const MapTrajectory ed = exact_diag_reference(sys, bath, beta, 0.05, 200, opts);
    const double err = max_coherence_error(ed, sys.epsilon, [&](double t) {
        // Gamma(t) = (2 c^2 / w^3) coth(beta w / 2) (1 - cos w t) for one mode.
        const double w = 1.7, c = 0.9;
        return std::exp(-2.0 * c * c / (w * w * w) / std::tanh(0.5 * beta * w) * (1.0 - std::cos(w * t)));
    });
    CHECK(err < 1e-9);
}

TEST_CASE("exact diagonalization: factorized and dense paths agree")
{
    const SystemSpec sys{0.25, 0.0};
    const DiscreteBath bath{{0.8, 2.1}, {0.5, 0.7}};
    ExactDiagOptions opts;
    opts.fock.cutoff = 8;
    const MapTrajectory fact = exact_diag_reference(sys, bath, 1.5, 0.1, 50, opts);
    opts.factorize = false;
    const MapTrajectory dense = exact_diag_reference(sys, bath, 1.5, 0.1, 50, opts);
    double worst = 0.0;
    for (std::size_t n = 0; n < fact.size(); ++n) worst = std::max(worst, max_abs(fact.maps[n] - dense.maps[n]));
    CHECK(worst < 1e-10);

    opts.max_dimension = 100; // 2 * 8 * 8 = 128 states
    CHECK_THROWS_AS(exact_diag_reference(sys, bath, 1.5, 0.1, 5, opts), BudgetError);
}

TEST_CASE("exact diagonalization: driven dynamics is a valid map")
{
    const SystemSpec sys = benchmark_system();
    const DiscreteBath bath = discretize_bath(benchmark_bath(), 3);
    ExactDiagOptions opts;
    opts.fock.cutoff = 6;
    const MapTrajectory ed = exact_diag_reference(sys, bath, 5.0, 0.05, 60, opts);
    CHECK(max_trace_defect(ed) < 1e-10);
    std::mt19937_64 rng(3);
    CHECK(preserves_hermiticity(ed.maps[60], rng));
    CHECK(max_closed_error(ed, sys) > 1e-3);
}

TEST_CASE("exact diagonalization converges to the continuum dephasing solution")
{
    const SpectralDensity sd = benchmark_bath();
    const SystemSpec sys{1.0, 0.0};
    const MapTrajectory analytic = pure_dephasing_analytic(sys, sd, 0.05, 100);

    ExactDiagOptions opts;
    opts.fock.thermal = true;
    const DiscreteBath bath = discretize_bath(sd, 60);
    const MapTrajectory ed = exact_diag_reference(sys, bath, sd.beta, 0.05, 100, opts);
    // Same discrete bath: exact up to the Fock tail.
    const MapTrajectory discrete = pure_dephasing_analytic(sys, bath, sd.beta, 0.05, 100);
    double vs_discrete = 0.0, vs_continuum = 0.0;
    for (std::size_t n = 0; n < ed.size(); ++n) {
        vs_discrete = std::max(vs_discrete, max_abs(ed.maps[n] - discrete.maps[n]));
        vs_continuum = std::max(vs_continuum, max_abs(ed.maps[n] - analytic.maps[n]));
    }
    CHECK(vs_discrete < 1e-7);
    CHECK(vs_continuum < 1e-3);
    // The coherence check against the series closed form is independent of the quadrature.
    CHECK(max_coherence_error(analytic, sys.epsilon, [&](double t) { return std::exp(-ohmic_dephasing_series(t, sd)); }) < 1e-7);
}

TEST_CASE("projector K0 is the double commutator with the bath variance")
{
    const SpectralDensity sd = benchmark_bath();
    const DiscreteBath bath = discretize_bath(sd, 4);
    double variance = 0.0;
    for (std::size_t j = 0; j < bath.size(); ++j)
        variance += bath.coupling[j] * bath.coupling[j] / (2.0 * bath.omega[j] * std::tanh(0.5 * sd.beta * bath.omega[j]));
    const Superoperator sz = commutator_superop(pauli_z());
    const Superoperator expected = -variance * sz * sz;

    K0Options opts;
    opts.fock.thermal = true;
    opts.fock.tail_tol = 1e-12;
    for (const SystemSpec& sys : {SystemSpec{0.0, -1.0}, SystemSpec{0.7, 0.0}}) {
        const Superoperator mode_sum = k0_projector_mode_sum(sys, bath, sd.beta, opts.fock);
        CHECK(max_abs(mode_sum - expected) < 1e-9 * variance);
    }

    // Full-space evaluation with a small bath agrees with the mode sum.
    const DiscreteBath two{{0.9, 2.5}, {0.6, 1.1}};
    K0Options full;
    full.fock.cutoff = 10;
    full.max_dimension = 400;
    full.allow_mode_sum = false;
    const SystemSpec sys = benchmark_system();
    const Superoperator k_full = k0_projector(sys, two, 1.0, full);
    const Superoperator k_sum = k0_projector_mode_sum(sys, two, 1.0, full.fock);
    CHECK(max_abs(k_full - k_sum) < 1e-10);
    full.max_dimension = 100;
    CHECK_THROWS_AS(k0_projector(sys, two, 1.0, full), BudgetError);

    SpectralDensity off = sd;
    off.xi = 0.0;
    CHECK(max_abs(k0_projector(sys, off, 20, 6)) == 0.0);
}
