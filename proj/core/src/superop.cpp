#include "gqme/superop.hpp"

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "gqme/errors.hpp"

namespace gqme {

namespace {

double eigen_floor(const Operator& rho)
{
    Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace

DensityMatrix::DensityMatrix(const Operator& rho, const Tolerances& tol) : rho_(rho)
{
    if (!rho.allFinite()) throw ValidationError("density matrix has non-finite entries");
    if (!is_hermitian(rho, tol.hermitian)) throw ValidationError("density matrix is not Hermitian");
    const cplx tr = rho.trace();
    if (std::abs(tr - 1.0) > tol.trace)
        throw ValidationError("density matrix trace is " + std::to_string(tr.real()) + ", expected 1");
    if (eigen_floor(rho) < -tol.positivity) throw ValidationError("density matrix has a negative eigenvalue");
}

DensityMatrix DensityMatrix::ground()
{
    Operator r = Operator::Zero();
    r(0, 0) = 1.0;
    return DensityMatrix(r);
}

DensityMatrix DensityMatrix::excited()
{
    Operator r = Operator::Zero();
    r(1, 1) = 1.0;
    return DensityMatrix(r);
}

DensityMatrix DensityMatrix::plus()
{
    Operator r;
    r << 0.5, 0.5, 0.5, 0.5;
    return DensityMatrix(r);
}

LiouvilleVector vectorize(const Operator& a)
{
    LiouvilleVector v;
    v << a(0, 0), a(1, 0), a(0, 1), a(1, 1);
    return v;
}

LiouvilleVector vectorize(const DensityMatrix& rho) { return vectorize(rho.matrix()); }

Operator devectorize(const LiouvilleVector& v)
{
    Operator a;
    a << v(0), v(2), v(1), v(3);
    return a;
}

LiouvilleRow trace_row()
{
    LiouvilleRow r;
    r << 1.0, 0.0, 0.0, 1.0;
    return r;
}

LiouvilleVector vectorized_identity() { return trace_row().transpose(); }

Superoperator kron(const Operator& a, const Operator& b)
{
    Superoperator k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return k;
}

Superoperator left_multiplication(const Operator& a) { return kron(Operator::Identity(), a); }

Superoperator right_multiplication(const Operator& b) { return kron(b.transpose(), Operator::Identity()); }

bool is_hermitian(const Operator& a, double tol)
{
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

Superoperator commutator_superop(const Operator& h, const Tolerances& tol)
{
    if (!h.allFinite()) throw ValidationError("Hamiltonian has non-finite entries");
    if (!is_hermitian(h, tol.hermitian)) throw ValidationError("Hamiltonian is not Hermitian");
    return left_multiplication(h) - right_multiplication(h);
}

Superoperator expm_pade(const Superoperator& a)
{
    // Higham (2005) degree-13 Pade approximant with scaling and squaring.
    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > theta13) s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Superoperator x = a / std::ldexp(1.0, s);
    const Superoperator id = Superoperator::Identity();
    const Superoperator x2 = x * x;
    const Superoperator x4 = x2 * x2;
    const Superoperator x6 = x4 * x2;

    const Superoperator u =
        x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
    const Superoperator v =
        x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;

    Superoperator r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < s; ++k) r = r * r;
    return r;
}

Superoperator expm(const Superoperator& a, double t, const Tolerances& tol)
{
    if (!a.allFinite() || !std::isfinite(t)) throw ValidationError("expm: non-finite input");
    const Superoperator m = a * t;
    const double scale = m.squaredNorm();
    if (scale == 0.0) return Superoperator::Identity();

    const double commutator = (m * m.adjoint() - m.adjoint() * m).norm();
    if (commutator <= tol.normality * scale) {
        Eigen::ComplexSchur<Superoperator> schur(m);
        const Superoperator& q = schur.matrixU();
        const Superoperator& tri = schur.matrixT();
        Superoperator d = Superoperator::Zero();
        for (int i = 0; i < 4; ++i) d(i, i) = std::exp(tri(i, i));
        return q * d * q.adjoint();
    }
    return expm_pade(m);
}

double frob_norm(const Superoperator& a) { return a.norm(); }

double trace_defect(const Superoperator& a) { return (trace_row() * a - trace_row()).norm(); }

double trace_leak(const Superoperator& a) { return (trace_row() * a).norm(); }

Operator pauli_x()
{
    Operator s;
    s << 0.0, 1.0, 1.0, 0.0;
    return s;
}

Operator pauli_y()
{
    Operator s;
    s << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
    return s;
}

Operator pauli_z()
{
    Operator s;
    s << 1.0, 0.0, 0.0, -1.0;
    return s;
}

Operator two_level_hamiltonian(double epsilon, double omega) { return epsilon * pauli_z() + omega * pauli_x(); }

const char* to_string(KernelKind kind)
{
    switch (kind) {
    case KernelKind::Discrete: return "DISCRETE";
    case KernelKind::Continuous: return "CONTINUOUS";
    case KernelKind::ContinuousHalf: return "CONTINUOUS_HALF";
    }
    return "UNKNOWN";
}

KernelKind kernel_kind_from_string(const std::string& name)
{
    if (name == "DISCRETE") return KernelKind::Discrete;
    if (name == "CONTINUOUS") return KernelKind::Continuous;
    if (name == "CONTINUOUS_HALF") return KernelKind::ContinuousHalf;
    throw ValidationError("unknown kernel kind '" + name + "'");
}

void require_trajectory(const MapTrajectory& traj, std::size_t min_maps, const Tolerances& tol)
{
    if (!(traj.dt > 0.0) || !std::isfinite(traj.dt)) throw ValidationError("trajectory time step must be positive");
    if (traj.maps.size() < min_maps)
        throw ValidationError("trajectory has " + std::to_string(traj.maps.size()) + " maps, need at least " +
                              std::to_string(min_maps));
    if ((traj.maps.front() - Superoperator::Identity()).cwiseAbs().maxCoeff() > tol.identity)
        throw ValidationError("first dynamical map is not the identity");
}

double max_trace_defect(const MapTrajectory& traj)
{
    double worst = 0.0;
    for (const auto& u : traj.maps) worst = std::max(worst, trace_defect(u));
    return worst;
}

void CompensatedSum::reset()
{
    sum_.setZero();
    comp_.setZero();
}

namespace {

// Neumaier update on one real component.
inline void neumaier(double& sum, double& comp, double x)
{
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
        comp += (sum - t) + x;
    else
        comp += (x - t) + sum;
    sum = t;
}

} // namespace

void CompensatedSum::add(const Superoperator& term)
{
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            double sr = sum_(i, j).real(), si = sum_(i, j).imag();
            double cr = comp_(i, j).real(), ci = comp_(i, j).imag();
            neumaier(sr, cr, term(i, j).real());
            neumaier(si, ci, term(i, j).imag());
            sum_(i, j) = cplx(sr, si);
            comp_(i, j) = cplx(cr, ci);
        }
    }
}

} // namespace gqme
