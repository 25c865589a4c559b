#pragma once

// Liouville-space algebra for a two-level system.
//
// Operators are 2x2 complex matrices; superoperators are 4x4 complex matrices
// acting on column-stacked operators, vec(A) = (A00, A10, A01, A11).
// With that convention vec(A X B) = (B^T kron A) vec(X).

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace gqme {

using cplx = std::complex<double>;
using Operator = Eigen::Matrix2cd;
using Superoperator = Eigen::Matrix4cd;
using LiouvilleVector = Eigen::Vector4cd;
using LiouvilleRow = Eigen::RowVector4cd;

// Default tolerances; every function that checks one takes the struct by value
// so callers can override individual fields.
struct Tolerances {
    double hermitian = 1e-12;
    double trace = 1e-12;
    double positivity = 1e-10;
    double normality = 1e-10;
    double identity = 1e-12;
    double trace_preserving = 1e-10;
};

// Validated 2x2 Hermitian, unit-trace, positive semidefinite state.
class DensityMatrix {
public:
    explicit DensityMatrix(const Operator& rho, const Tolerances& tol = {});

    const Operator& matrix() const { return rho_; }
    cplx operator()(int i, int j) const { return rho_(i, j); }

    static DensityMatrix ground();  // |0><0|
    static DensityMatrix excited(); // |1><1|
    static DensityMatrix plus();    // (|0>+|1>)(<0|+<1|)/2

private:
    Operator rho_;
};

using StateSeries = std::vector<Operator>;

LiouvilleVector vectorize(const Operator& a);
LiouvilleVector vectorize(const DensityMatrix& rho);
Operator devectorize(const LiouvilleVector& v);

// <<I| : the row that takes the trace of a vectorized operator.
LiouvilleRow trace_row();
LiouvilleVector vectorized_identity();

Superoperator kron(const Operator& a, const Operator& b);
Superoperator left_multiplication(const Operator& a);  // X -> A X
Superoperator right_multiplication(const Operator& b); // X -> X B

bool is_hermitian(const Operator& a, double tol);

// L = [H, .]; throws ValidationError if H is not Hermitian.
Superoperator commutator_superop(const Operator& h, const Tolerances& tol = {});

// exp(A t). Normal inputs go through a Schur (unitary) diagonalization,
// everything else through Pade-13 scaling and squaring.
Superoperator expm(const Superoperator& a, double t = 1.0, const Tolerances& tol = {});
Superoperator expm_pade(const Superoperator& a);

double frob_norm(const Superoperator& a);

// |<<I| A - <<I||, zero for trace-preserving maps.
double trace_defect(const Superoperator& a);
// |<<I| A|, zero for kernels of trace-preserving dynamics.
double trace_leak(const Superoperator& a);

// Pauli matrices and the two-level Hamiltonian eps*sz + Omega*sx.
Operator pauli_x();
Operator pauli_y();
Operator pauli_z();
Operator two_level_hamiltonian(double epsilon, double omega);

// Dynamical maps on a uniform grid; maps[n] = U(n dt), maps[0] = I.
struct MapTrajectory {
    double dt = 0.0;
    std::vector<Superoperator> maps;

    std::size_t size() const { return maps.size(); }
    double time(std::size_t n) const { return static_cast<double>(n) * dt; }
};

enum class KernelKind { Discrete, Continuous, ContinuousHalf };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

// Kernels on a uniform grid. For ContinuousHalf, kernels[j] sits at (j + 1/2) dt.
struct KernelSeries {
    double dt = 0.0;
    KernelKind kind = KernelKind::Discrete;
    std::vector<Superoperator> kernels;

    std::size_t size() const { return kernels.size(); }
    double time(std::size_t n) const
    {
        return (static_cast<double>(n) + (kind == KernelKind::ContinuousHalf ? 0.5 : 0.0)) * dt;
    }
};

// Throws ValidationError unless dt > 0, the trajectory holds at least
// min_maps maps, and maps[0] is the identity.
void require_trajectory(const MapTrajectory& traj, std::size_t min_maps, const Tolerances& tol = {});

// Largest trace defect over all maps of a trajectory.
double max_trace_defect(const MapTrajectory& traj);

// Sum of 4x4 complex terms with Neumaier-style compensation, entrywise.
class CompensatedSum {
public:
    CompensatedSum() { reset(); }
    void reset();
    void add(const Superoperator& term);
    Superoperator value() const { return sum_ + comp_; }

private:
    Superoperator sum_;
    Superoperator comp_;
};

} // namespace gqme
