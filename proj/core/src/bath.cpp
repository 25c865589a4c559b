#include "gqme/bath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gqme {

void SpectralDensity::validate() const
{
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw ValidationError("spectral density: xi must be >= 0");
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("spectral density: s must be > 0");
    if (!(omega_c > 0.0) || !std::isfinite(omega_c)) throw ValidationError("spectral density: omega_c must be > 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("spectral density: beta must be > 0");
}

SpectralDensity benchmark_bath() { return SpectralDensity{0.3, 1.0, 5.0, 5.0}; }

SystemSpec benchmark_system() { return SystemSpec{0.0, -1.0}; }

double spectral_density(double w, const SpectralDensity& sd)
{
    if (w < 0.0) throw ValidationError("spectral density evaluated at negative frequency");
    if (w == 0.0) return 0.0;
    return 0.5 * std::numbers::pi * sd.xi * std::pow(w, sd.s) / std::pow(sd.omega_c, sd.s - 1.0) *
           std::exp(-w / sd.omega_c);
}

namespace {

// J(w) coth(beta w / 2), continuous at w -> 0.
double thermal_weight(double w, const SpectralDensity& sd)
{
    const double x = 0.5 * sd.beta * w;
    if (x < 1e-8) {
        // J(w) * 2 / (beta w) for small w
        return 0.5 * std::numbers::pi * sd.xi * std::pow(w, sd.s - 1.0) / std::pow(sd.omega_c, sd.s - 1.0) *
               std::exp(-w / sd.omega_c) * 2.0 / sd.beta;
    }
    return spectral_density(w, sd) / std::tanh(x);
}

} // namespace

cplx bath_correlation(double t, const SpectralDensity& sd, double rel_tol)
{
    sd.validate();
    if (t < 0.0) throw ValidationError("bath_correlation needs t >= 0");
    if (sd.xi == 0.0) return {0.0, 0.0};

    using boost::math::quadrature::gauss_kronrod;
    const double upper = sd.omega_c * (45.0 + 5.0 * sd.s);
    // Panels at most ~3 oscillation periods wide, never wider than wc.
    double width = sd.omega_c;
    if (t > 0.0) width = std::min(width, 6.0 * std::numbers::pi / t);
    const auto panels = static_cast<std::size_t>(std::ceil(upper / width));

    double re = 0.0, im = 0.0, err = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = upper * static_cast<double>(p) / static_cast<double>(panels);
        const double b = upper * static_cast<double>(p + 1) / static_cast<double>(panels);
        double e1 = 0.0, e2 = 0.0, l1 = 0.0;
        // Only the first panel can hold an endpoint singularity (s < 1); the
        // others are smooth and a few bisections suffice. Deep recursion on
        // the exponentially small tail would chase round-off.
        const unsigned depth = p == 0 ? 15 : 4;
        re += gauss_kronrod<double, 61>::integrate(
            [&](double w) { return thermal_weight(w, sd) * std::cos(w * t); }, a, b, depth, 1e-13, &e1, &l1);
        if (t > 0.0)
            im -= gauss_kronrod<double, 61>::integrate(
                [&](double w) { return spectral_density(w, sd) * std::sin(w * t); }, a, b, depth, 1e-13, &e2);
        err += e1 + e2;
        scale += l1;
    }
    const double inv_pi = 1.0 / std::numbers::pi;
    // Errors are judged against the L1 mass of the integrand: C(t) itself
    // passes through zero.
    if (err > rel_tol * std::max(scale, 1e-300))
        throw ConvergenceError("bath correlation quadrature did not converge at t = " + std::to_string(t));
    return {re * inv_pi, im * inv_pi};
}

cplx ExpFit::evaluate(double t) const
{
    cplx sum{0.0, 0.0};
    for (const auto& term : terms) sum += term.alpha * std::exp(-term.nu * t);
    return sum;
}

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct FitProblem {
    std::span<const cplx> samples;
    double h;
    double origin_weight;
    double nu_floor;
    std::vector<double> extra; // per-sample multipliers from the minimax rounds

    double weight(std::size_t i) const { return (i == 0 ? origin_weight : 1.0) * (extra.empty() ? 1.0 : extra[i]); }

    // Weighted residual, real and imaginary parts interleaved.
    VectorXd residual(const std::vector<ExpTerm>& terms) const
    {
        const std::size_t n = samples.size();
        VectorXd r(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = h * static_cast<double>(i);
            cplx model{0.0, 0.0};
            for (const auto& term : terms) model += term.alpha * std::exp(-term.nu * t);
            const cplx d = weight(i) * (model - samples[i]);
            r(2 * i) = d.real();
            r(2 * i + 1) = d.imag();
        }
        return r;
    }

    // Columns: Re alpha, Im alpha, Re nu, Im nu per term.
    MatrixXd jacobian(const std::vector<ExpTerm>& terms) const
    {
        const std::size_t n = samples.size();
        const std::size_t k = terms.size();
        MatrixXd jac(2 * n, 4 * k);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = h * static_cast<double>(i);
            const double w = weight(i);
            for (std::size_t j = 0; j < k; ++j) {
                const cplx e = w * std::exp(-terms[j].nu * t);
                const cplx dnu = -t * terms[j].alpha * e;
                const cplx cols[4] = {e, cplx(0.0, 1.0) * e, dnu, cplx(0.0, 1.0) * dnu};
                for (int c = 0; c < 4; ++c) {
                    jac(2 * i, 4 * j + c) = cols[c].real();
                    jac(2 * i + 1, 4 * j + c) = cols[c].imag();
                }
            }
        }
        return jac;
    }

    void project(std::vector<ExpTerm>& terms) const
    {
        for (auto& term : terms)
            if (term.nu.real() < nu_floor) term.nu = cplx(nu_floor, term.nu.imag());
    }

    // Weighted linear least squares for the amplitudes at fixed rates.
    void solve_amplitudes(std::vector<ExpTerm>& terms) const
    {
        const std::size_t n = samples.size();
        MatrixXcd a(n, terms.size());
        VectorXcd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = h * static_cast<double>(i);
            for (std::size_t j = 0; j < terms.size(); ++j) a(i, j) = weight(i) * std::exp(-terms[j].nu * t);
            b(i) = weight(i) * samples[i];
        }
        const VectorXcd x = a.completeOrthogonalDecomposition().solve(b);
        for (std::size_t j = 0; j < terms.size(); ++j) terms[j].alpha = x(j);
    }
};

std::vector<ExpTerm> matrix_pencil_rates(std::span<const cplx> samples, double h, std::size_t k)
{
    const std::size_t n = samples.size();
    const std::size_t pencil = std::max<std::size_t>(k, n / 3);
    const std::size_t rows = n - pencil;
    MatrixXcd hankel(rows, pencil + 1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j <= pencil; ++j) hankel(i, j) = samples[i + j];

    Eigen::BDCSVD<MatrixXcd> svd(hankel, Eigen::ComputeThinV);
    // Row space of the Hankel matrix is spanned by conj(V).
    const MatrixXcd w = svd.matrixV().leftCols(k).conjugate();
    const MatrixXcd w1 = w.topRows(pencil);
    const MatrixXcd w2 = w.bottomRows(pencil);
    const MatrixXcd pencil_op = w1.completeOrthogonalDecomposition().solve(w2);
    Eigen::ComplexEigenSolver<MatrixXcd> es(pencil_op, false);

    std::vector<ExpTerm> terms(k);
    for (std::size_t j = 0; j < k; ++j) {
        cplx z = es.eigenvalues()(static_cast<Eigen::Index>(j));
        if (std::abs(z) < 1e-300) z = 1e-300;
        terms[j].nu = -std::log(z) / h;
        terms[j].alpha = 0.0;
    }
    return terms;
}

} // namespace

ExpFit fit_exponentials(std::span<const cplx> samples, double h, std::size_t n_terms, const FitOptions& opts)
{
    if (n_terms < 1) throw ValidationError("fit_exponentials needs at least one term");
    if (!(h > 0.0)) throw ValidationError("fit_exponentials: sample step must be positive");
    if (samples.size() < 3 * n_terms + 2)
        throw ValidationError("fit_exponentials: too few samples for " + std::to_string(n_terms) + " terms");

    const double horizon = h * static_cast<double>(samples.size() - 1);
    FitProblem problem{samples, h, opts.origin_weight, 1e-3 / horizon, {}};

    std::vector<ExpTerm> terms = matrix_pencil_rates(samples, h, n_terms);
    problem.project(terms);
    problem.solve_amplitudes(terms);

    const auto levenberg_marquardt = [&problem, &opts](std::vector<ExpTerm>& terms) {
    VectorXd r = problem.residual(terms);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int it = 0; it < opts.max_iterations; ++it) {
        const MatrixXd jac = problem.jacobian(terms);
        const MatrixXd jtj = jac.transpose() * jac;
        const VectorXd g = jac.transpose() * r;
        bool accepted = false;
        for (int tries = 0; tries < 30 && !accepted; ++tries) {
            MatrixXd damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
            const VectorXd step = damped.ldlt().solve(-g);
            std::vector<ExpTerm> trial = terms;
            for (std::size_t j = 0; j < trial.size(); ++j) {
                trial[j].alpha += cplx(step(4 * j), step(4 * j + 1));
                trial[j].nu += cplx(step(4 * j + 2), step(4 * j + 3));
            }
            problem.project(trial);
            const VectorXd r_trial = problem.residual(trial);
            const double c_trial = r_trial.squaredNorm();
            if (std::isfinite(c_trial) && c_trial < cost) {
                const double gain = (cost - c_trial) / cost;
                terms = std::move(trial);
                r = r_trial;
                cost = c_trial;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (gain < 1e-14) it = opts.max_iterations;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) break;
    }
    };

    const auto max_error = [&](const std::vector<ExpTerm>& t) {
        double worst = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            cplx model{0.0, 0.0};
            for (const auto& term : t) model += term.alpha * std::exp(-term.nu * h * static_cast<double>(i));
            worst = std::max(worst, std::abs(model - samples[i]));
        }
        return worst;
    };

    levenberg_marquardt(terms);

    // Lawson-style reweighting pushes the least-squares fit toward the
    // uniform (max-norm) optimum the residual is reported in.
    std::vector<ExpTerm> best = terms;
    double best_error = max_error(terms);
    problem.extra.assign(samples.size(), 1.0);
    for (int round = 0; round < opts.minimax_rounds; ++round) {
        double total = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            cplx model{0.0, 0.0};
            for (const auto& term : terms) model += term.alpha * std::exp(-term.nu * h * static_cast<double>(i));
            const double w = problem.extra[i] * problem.extra[i] * std::abs(model - samples[i]);
            problem.extra[i] = w;
            total += w;
        }
        if (!(total > 0.0)) break;
        const double mean = total / static_cast<double>(samples.size());
        for (auto& w : problem.extra) w = std::sqrt(std::max(w / mean, 1e-8));
        problem.extra[0] = 1.0; // the origin stays pinned
        levenberg_marquardt(terms);
        const double e = max_error(terms);
        if (e < best_error) {
            best_error = e;
            best = terms;
        }
    }

    ExpFit fit;
    fit.terms = std::move(best);
    double peak = 0.0;
    for (const auto& c : samples) peak = std::max(peak, std::abs(c));
    fit.relative_residual = peak > 0.0 ? best_error / peak : best_error;
    return fit;
}

ExpFit fit_exponentials(const SpectralDensity& sd, std::size_t n_terms, double horizon, const FitOptions& opts,
                        Warnings* warnings)
{
    sd.validate();
    if (!(horizon > 0.0)) throw ValidationError("fit horizon must be positive");
    if (sd.xi == 0.0) return ExpFit{};
    const auto n = static_cast<std::size_t>(std::llround(horizon / opts.sample_step)) + 1;
    std::vector<cplx> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = bath_correlation(opts.sample_step * static_cast<double>(i), sd);
    ExpFit fit = fit_exponentials(samples, opts.sample_step, n_terms, opts);
    if (fit.relative_residual > opts.residual_threshold)
        warn(warnings, "exponential fit residual " + std::to_string(fit.relative_residual) + " exceeds threshold " +
                           std::to_string(opts.residual_threshold));
    return fit;
}

} // namespace gqme
