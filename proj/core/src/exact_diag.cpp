#include "gqme/exact_diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gqme {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using boost::math::quadrature::gauss_kronrod;

// Panels starting at 0 may hold an integrable endpoint singularity; the
// rest are smooth and need only a few bisections.
double integrate(const auto& f, double a, double b)
{
    return gauss_kronrod<double, 61>::integrate(f, a, b, a == 0.0 ? 15 : 4, 1e-13);
}

// J(w) coth(beta w / 2), continuous at w -> 0.
double thermal_weight(double w, const SpectralDensity& sd)
{
    const double x = 0.5 * sd.beta * w;
    if (x < 1e-8)
        return 0.5 * std::numbers::pi * sd.xi * std::pow(w, sd.s - 1.0) / std::pow(sd.omega_c, sd.s - 1.0) *
               std::exp(-w / sd.omega_c) * 2.0 / sd.beta;
    return spectral_density(w, sd) / std::tanh(x);
}

double coth(double x) { return 1.0 / std::tanh(x); }

// (1 - cos(w t)) / w^2 without cancellation.
double one_minus_cos_over_w2(double w, double t)
{
    if (w == 0.0) return 0.5 * t * t;
    const double s = std::sin(0.5 * w * t);
    return 2.0 * s * s / (w * w);
}

void validate_bath(const DiscreteBath& bath, double beta)
{
    if (bath.omega.size() != bath.coupling.size()) throw ValidationError("discrete bath: size mismatch");
    for (std::size_t j = 0; j < bath.size(); ++j)
        if (!(bath.omega[j] > 0.0) || !std::isfinite(bath.coupling[j]))
            throw ValidationError("discrete bath: frequencies must be > 0 and couplings finite");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("discrete bath: beta must be > 0");
}

void validate_steps(double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be > 0");
}

// Truncated single-mode operators in the Fock basis.
MatrixXd number_op(std::size_t f)
{
    MatrixXd n = MatrixXd::Zero(f, f);
    for (std::size_t k = 0; k < f; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

MatrixXd position_op(std::size_t f, double w)
{
    MatrixXd q = MatrixXd::Zero(f, f);
    const double scale = 1.0 / std::sqrt(2.0 * w);
    for (std::size_t k = 1; k < f; ++k) {
        q(k - 1, k) = std::sqrt(static_cast<double>(k)) * scale;
        q(k, k - 1) = q(k - 1, k);
    }
    return q;
}

// Normalized thermal populations of the truncated oscillator.
VectorXd thermal_populations(std::size_t f, double w, double beta)
{
    VectorXd p(f);
    for (std::size_t k = 0; k < f; ++k) p(k) = std::exp(-beta * w * static_cast<double>(k));
    return p / p.sum();
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b)
{
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

VectorXd kron(const VectorXd& a, const VectorXd& b)
{
    VectorXd out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

std::size_t saturating_product(const std::vector<std::size_t>& dims, std::size_t cap)
{
    std::size_t d = 1;
    for (std::size_t f : dims) {
        if (f != 0 && d > cap / f) return cap + 1;
        d *= f;
    }
    return d;
}

struct BathOperators {
    MatrixXd h;      // sum_j w_j n_j
    MatrixXd b;      // sum_j c_j q_j
    VectorXd rho;    // diagonal of the product thermal state
};

BathOperators bath_operators(const DiscreteBath& bath, const std::vector<std::size_t>& dims, double beta)
{
    const std::size_t db = saturating_product(dims, std::numeric_limits<std::size_t>::max() / 2);
    BathOperators ops{MatrixXd::Zero(db, db), MatrixXd::Zero(db, db), VectorXd::Ones(1)};
    std::size_t left = 1;
    for (std::size_t j = 0; j < bath.size(); ++j) {
        const std::size_t f = dims[j];
        const std::size_t right = db / (left * f);
        const MatrixXd il = MatrixXd::Identity(left, left), ir = MatrixXd::Identity(right, right);
        ops.h += kron(kron(il, bath.omega[j] * number_op(f)), ir);
        ops.b += kron(kron(il, bath.coupling[j] * position_op(f, bath.omega[j])), ir);
        ops.rho = kron(ops.rho, thermal_populations(f, bath.omega[j], beta));
        left *= f;
    }
    return ops;
}

MatrixXd real_part(const Operator& a) { return a.real(); }

// Partial trace over the bath of a (2 db) x (2 db) matrix in system-major order.
Eigen::Matrix2d trace_bath(const MatrixXd& z, Eigen::Index db)
{
    Eigen::Matrix2d out;
    for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) out(c, d) = z.block(c * db, d * db, db, db).trace();
    return out;
}

MatrixXd full_hamiltonian(const SystemSpec& sys, const BathOperators& ops)
{
    const auto db = ops.h.rows();
    const MatrixXd ib = MatrixXd::Identity(db, db);
    return kron(real_part(sys.hamiltonian()), ib) + kron(MatrixXd::Identity(2, 2), ops.h) -
           kron(real_part(pauli_z()), ops.b);
}

Superoperator k0_full(const SystemSpec& sys, const DiscreteBath& bath, const std::vector<std::size_t>& dims,
                      double beta)
{
    const BathOperators ops = bath_operators(bath, dims, beta);
    const MatrixXd h = full_hamiltonian(sys, ops);
    const auto db = ops.h.rows();
    const MatrixXd rho_b = ops.rho.asDiagonal();
    Superoperator k0 = Superoperator::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            MatrixXd e = MatrixXd::Zero(2, 2);
            e(a, b) = 1.0;
            const MatrixXd y = kron(e, rho_b);
            MatrixXd z = h * y - y * h;
            const MatrixXd tz = trace_bath(z, db);
            z -= kron(tz, rho_b);
            const MatrixXd w = h * z - z * h;
            const Eigen::Matrix2d r = -trace_bath(w, db);
            k0.col(a + 2 * b) = vectorize(Operator(r.cast<cplx>()));
        }
    return k0;
}

// Pure dephasing, one mode: chi(t) = Tr[exp(-i H0 t) rho exp(i H1 t)] with
// H0/H1 = w n -/+ c q, evaluated in the two eigenbases.
struct ModeOverlap {
    VectorXd e0, e1;
    MatrixXd g;

    ModeOverlap(double w, double c, std::size_t f, double beta)
    {
        const MatrixXd n = w * number_op(f), q = c * position_op(f, w);
        Eigen::SelfAdjointEigenSolver<MatrixXd> s0(n - q), s1(n + q);
        e0 = s0.eigenvalues();
        e1 = s1.eigenvalues();
        const MatrixXd& a = s0.eigenvectors();
        const MatrixXd& b = s1.eigenvectors();
        const MatrixXd rho = thermal_populations(f, w, beta).asDiagonal();
        g = (a.transpose() * rho * b).cwiseProduct(a.transpose() * b);
    }

    cplx chi(double t) const
    {
        const Eigen::VectorXcd p0 = (cplx(0.0, -t) * e0.cast<cplx>()).array().exp();
        const Eigen::VectorXcd p1 = (cplx(0.0, t) * e1.cast<cplx>()).array().exp();
        return p0.transpose() * (g.cast<cplx>() * p1);
    }
};

MapTrajectory dephasing_maps(const SystemSpec& sys, double dt, std::size_t n_steps, const auto& coherence)
{
    MapTrajectory traj{dt, {}};
    traj.maps.reserve(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const cplx f = std::exp(cplx(0.0, -2.0 * sys.epsilon * t)) * coherence(t);
        Superoperator u = Superoperator::Zero();
        u(0, 0) = 1.0;
        u(3, 3) = 1.0;
        u(2, 2) = f;             // |0><1|
        u(1, 1) = std::conj(f);  // |1><0|
        traj.maps.push_back(u);
    }
    return traj;
}

} // namespace

DiscreteBath discretize_bath(const SpectralDensity& sd, std::size_t n_modes, const DiscretizationOptions& opts)
{
    sd.validate();
    if (n_modes == 0) return {};
    const double low_edge = opts.low_edge > 0.0 ? opts.low_edge : std::min(0.05, 3.0 / static_cast<double>(n_modes));
    if (opts.low_edge < 0.0 || !(opts.high_edge > low_edge))
        throw ValidationError("discretize_bath: need 0 < low_edge < high_edge");
    const double hi = opts.high_edge * sd.omega_c, lo = low_edge * sd.omega_c;
    std::vector<double> edges{0.0};
    if (n_modes == 1) {
        edges.push_back(hi);
    } else {
        const double ratio = std::log(hi / lo) / static_cast<double>(n_modes - 1);
        for (std::size_t k = 0; k < n_modes; ++k) edges.push_back(lo * std::exp(ratio * static_cast<double>(k)));
        edges.back() = hi;
    }
    DiscreteBath bath;
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double a = edges[k], b = edges[k + 1];
        // J(w)/w is finite at 0 for s >= 1; integrable for s > 0.
        const double weight =
            integrate([&](double w) { return w == 0.0 ? 0.0 : spectral_density(w, sd) / w; }, a, b);
        const double mass = integrate([&](double w) { return spectral_density(w, sd); }, a, b);
        if (!(weight > 0.0)) continue;
        const double w = mass / weight;
        bath.omega.push_back(w);
        bath.coupling.push_back(std::sqrt(2.0 * w * w * weight / std::numbers::pi));
    }
    return bath;
}

std::vector<std::size_t> fock_cutoffs(const DiscreteBath& bath, double beta, const FockPolicy& policy)
{
    if (policy.cutoff < 1) throw ValidationError("fock cutoff must be >= 1");
    std::vector<std::size_t> out(bath.size(), policy.cutoff);
    if (!policy.thermal) return out;
    if (!(policy.tail_tol > 0.0 && policy.tail_tol < 1.0)) throw ValidationError("fock tail_tol must be in (0, 1)");
    for (std::size_t j = 0; j < bath.size(); ++j) {
        const double w = bath.omega[j];
        const double thermal = std::ceil(std::log(policy.tail_tol) / (-beta * w));
        // The two coupling branches displace the oscillator by +/- c / (w sqrt(2 w)).
        const double disp = std::abs(bath.coupling[j]) / (w * std::sqrt(2.0 * w));
        const double headroom = std::ceil((2.0 * disp + 3.0) * (2.0 * disp + 3.0));
        const double f = std::max(static_cast<double>(policy.cutoff), thermal + headroom);
        out[j] = static_cast<std::size_t>(std::min(f, static_cast<double>(policy.max_cutoff)));
    }
    return out;
}

MapTrajectory exact_diag_reference(const SystemSpec& sys, const DiscreteBath& bath, double beta, double dt,
                                   std::size_t n_steps, const ExactDiagOptions& opts)
{
    validate_bath(bath, beta);
    validate_steps(dt);
    const auto dims = fock_cutoffs(bath, beta, opts.fock);

    if (sys.omega == 0.0 && opts.factorize) {
        std::vector<ModeOverlap> modes;
        modes.reserve(bath.size());
        for (std::size_t j = 0; j < bath.size(); ++j) modes.emplace_back(bath.omega[j], bath.coupling[j], dims[j], beta);
        return dephasing_maps(sys, dt, n_steps, [&](double t) {
            cplx chi = 1.0;
            for (const auto& m : modes) chi *= m.chi(t);
            return chi;
        });
    }

    const std::size_t d = 2 * saturating_product(dims, opts.max_dimension);
    if (d > opts.max_dimension)
        throw BudgetError("exact diagonalization: Hilbert dimension exceeds budget of " +
                          std::to_string(opts.max_dimension));
    const BathOperators ops = bath_operators(bath, dims, beta);
    const auto db = ops.h.rows();
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(full_hamiltonian(sys, ops));
    const VectorXd& lambda = solver.eigenvalues();
    const MatrixXd& w = solver.eigenvectors();
    const MatrixXd w_sys[2] = {w.topRows(db), w.bottomRows(db)};

    // rho_cd(t) for initial |a><b| (x) rho_b = phi^T (X_ab o P_cd) conj(phi),
    // X_ab = W_a^T rho_b W_b, P_cd = W_c^T W_d, phi = exp(-i lambda t).
    MatrixXd x[2][2], p[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            x[a][b] = w_sys[a].transpose() * ops.rho.asDiagonal() * w_sys[b];
            p[a][b] = w_sys[a].transpose() * w_sys[b];
        }
    std::vector<MatrixXd> g;
    g.reserve(16);
    for (int ab = 0; ab < 4; ++ab)
        for (int cd = 0; cd < 4; ++cd)
            g.push_back(x[ab % 2][ab / 2].cwiseProduct(p[cd % 2][cd / 2]));

    MapTrajectory traj{dt, {}};
    traj.maps.reserve(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const VectorXd c = (lambda * t).array().cos(), s = (lambda * t).array().sin();
        Superoperator u;
        for (int ab = 0; ab < 4; ++ab)
            for (int cd = 0; cd < 4; ++cd) {
                // phi = c - i s, conj(phi) = c + i s
                const MatrixXd& m = g[static_cast<std::size_t>(4 * ab + cd)];
                const VectorXd mc = m * c, ms = m * s;
                const double re = c.dot(mc) + s.dot(ms);
                const double im = c.dot(ms) - s.dot(mc);
                u(cd, ab) = cplx(re, im);
            }
        traj.maps.push_back(u);
    }
    return traj;
}

MapTrajectory exact_diag_reference(const SystemSpec& sys, const SpectralDensity& sd, std::size_t n_modes,
                                   std::size_t fock_cutoff, double dt, std::size_t n_steps,
                                   const ExactDiagOptions& opts)
{
    sd.validate();
    ExactDiagOptions o = opts;
    o.fock.cutoff = fock_cutoff;
    return exact_diag_reference(sys, discretize_bath(sd, n_modes, o.grid), sd.beta, dt, n_steps, o);
}

double dephasing_exponent(double t, const SpectralDensity& sd)
{
    sd.validate();
    if (t < 0.0) throw ValidationError("dephasing exponent needs t >= 0");
    if (t == 0.0 || sd.xi == 0.0) return 0.0;
    const double upper = sd.omega_c * (45.0 + 5.0 * sd.s);
    const double width = std::min(sd.omega_c, 6.0 * std::numbers::pi / t);
    const auto panels = static_cast<std::size_t>(std::ceil(upper / width));
    double sum = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = upper * static_cast<double>(p) / static_cast<double>(panels);
        const double b = upper * static_cast<double>(p + 1) / static_cast<double>(panels);
        sum += integrate([&](double w) { return thermal_weight(w, sd) * one_minus_cos_over_w2(w, t); }, a, b);
    }
    return 4.0 / std::numbers::pi * sum;
}

double dephasing_exponent(double t, const DiscreteBath& bath, double beta)
{
    validate_bath(bath, beta);
    double sum = 0.0;
    for (std::size_t j = 0; j < bath.size(); ++j) {
        const double w = bath.omega[j], c = bath.coupling[j];
        sum += 2.0 * c * c / w * coth(0.5 * beta * w) * one_minus_cos_over_w2(w, t);
    }
    return sum;
}

MapTrajectory pure_dephasing_analytic(const SystemSpec& sys, const SpectralDensity& sd, double dt, std::size_t n_steps)
{
    if (sys.omega != 0.0) throw ValidationError("pure dephasing solution requires Omega = 0");
    validate_steps(dt);
    return dephasing_maps(sys, dt, n_steps, [&](double t) { return cplx(std::exp(-dephasing_exponent(t, sd))); });
}

MapTrajectory pure_dephasing_analytic(const SystemSpec& sys, const DiscreteBath& bath, double beta, double dt,
                                      std::size_t n_steps)
{
    if (sys.omega != 0.0) throw ValidationError("pure dephasing solution requires Omega = 0");
    validate_steps(dt);
    return dephasing_maps(sys, dt, n_steps,
                          [&](double t) { return cplx(std::exp(-dephasing_exponent(t, bath, beta))); });
}

Superoperator k0_projector_mode_sum(const SystemSpec& sys, const DiscreteBath& bath, double beta,
                                    const FockPolicy& fock)
{
    validate_bath(bath, beta);
    const auto dims = fock_cutoffs(bath, beta, fock);
    Superoperator k0 = Superoperator::Zero();
    for (std::size_t j = 0; j < bath.size(); ++j) {
        const DiscreteBath single{{bath.omega[j]}, {bath.coupling[j]}};
        k0 += k0_full(sys, single, {dims[j]}, beta);
    }
    return k0;
}

Superoperator k0_projector(const SystemSpec& sys, const DiscreteBath& bath, double beta, const K0Options& opts)
{
    validate_bath(bath, beta);
    const auto dims = fock_cutoffs(bath, beta, opts.fock);
    const std::size_t d = 2 * saturating_product(dims, opts.max_dimension);
    if (d <= opts.max_dimension) return k0_full(sys, bath, dims, beta);
    if (!opts.allow_mode_sum)
        throw BudgetError("k0 projector: Hilbert dimension exceeds budget of " + std::to_string(opts.max_dimension));
    return k0_projector_mode_sum(sys, bath, beta, opts.fock);
}

Superoperator k0_projector(const SystemSpec& sys, const SpectralDensity& sd, std::size_t n_modes,
                           std::size_t fock_cutoff, const K0Options& opts)
{
    sd.validate();
    K0Options o = opts;
    o.fock.cutoff = fock_cutoff;
    return k0_projector(sys, discretize_bath(sd, n_modes, o.grid), sd.beta, o);
}

} // namespace gqme
