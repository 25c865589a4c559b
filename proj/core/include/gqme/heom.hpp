#pragma once

// Dense hierarchical equations of motion for the spin-boson model with a
// sum-of-exponentials bath, C(t) = sum_k alpha_k exp(-nu_k t).
//
// Each bath term contributes a mode for C(t) and one for C*(t); modes with
// equal rates are merged. Auxiliary density operators are rescaled so that
// up- and down-couplings have comparable magnitude.

#include <cstddef>
#include <variant>
#include <vector>

#include "gqme/bath.hpp"
#include "gqme/superop.hpp"

namespace gqme {

// Keep ADOs with sum_k n_k <= depth.
struct TotalDepth {
    int depth = 10;
};

// Keep ADOs with n_k <= L_k, L_k = min(L_max, max(L_min, floor(L_max nu_min / Re nu_k))).
struct PerModeDepth {
    int l_max = 20;
    int l_min = 8;
};

struct HeomConfig {
    std::variant<TotalDepth, PerModeDepth> truncation = TotalDepth{};
    double step = 0.0;              // RK4 step; 0 means "use the output dt"
    std::size_t max_ados = 400000;  // memory budget in auxiliary operators
};

struct HeomMode {
    cplx gamma;   // decay rate
    cplx eta;     // coefficient of exp(-gamma t) in C(t)
    cplx eta_bar; // coefficient of exp(-gamma t) in C*(t)
};

std::vector<HeomMode> heom_modes(const ExpFit& fit);

// Per-mode depth limits for a given truncation; -1 entries mean "bounded by
// the total depth only".
std::vector<int> mode_depths(const std::vector<HeomMode>& modes, const HeomConfig& cfg);

// Number of ADOs the configuration would create (saturates at SIZE_MAX).
std::size_t heom_hierarchy_size(const ExpFit& fit, const HeomConfig& cfg);

// Linear generator of the hierarchy acting on a block of four Liouville
// columns per ADO (one column per basis initial operator).
class HeomGenerator {
public:
    HeomGenerator(const SystemSpec& sys, const ExpFit& fit, const HeomConfig& cfg);

    std::size_t ado_count() const { return gamma_sum_.size(); }
    std::size_t state_size() const { return 16 * ado_count(); }
    std::size_t mode_count() const { return modes_.size(); }

    // out = A in; both point to state_size() entries. Block a occupies
    // [16a, 16a + 16), column-major 4x4.
    void apply(const cplx* in, cplx* out) const;

private:
    struct Link {
        std::size_t target;
        cplx row_factor[4];
    };

    std::vector<HeomMode> modes_;
    Superoperator liouvillian_; // -i L_s
    std::vector<cplx> gamma_sum_;
    std::vector<std::size_t> link_offset_;
    std::vector<Link> links_;
};

// Dynamical maps U_0 ... U_{n_steps} on a grid of spacing dt, built from the
// four basis initial operators and propagated with fixed-step RK4.
MapTrajectory heom_propagate(const SystemSpec& sys, const ExpFit& fit, const HeomConfig& cfg, double dt,
                             std::size_t n_steps);

} // namespace gqme
