#include "gqme/heom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "gqme/errors.hpp"

namespace gqme {

namespace {

constexpr cplx kI{0.0, 1.0};

// sz acting from the left / right on column-stacked entries (00, 10, 01, 11).
constexpr double kLeftSign[4] = {1.0, -1.0, 1.0, -1.0};
constexpr double kRightSign[4] = {1.0, 1.0, -1.0, -1.0};

struct VectorHash {
    std::size_t operator()(const std::vector<int>& v) const
    {
        std::size_t h = 1469598103934665603ull;
        for (int x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
        return h;
    }
};

std::size_t saturating_mul(std::size_t a, std::size_t b)
{
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return std::numeric_limits<std::size_t>::max();
    return a * b;
}

// Count index vectors with n_k <= caps[k] (cap < 0: unbounded) and sum <= total (total < 0: unbounded).
std::size_t count_ados(const std::vector<int>& caps, int total)
{
    if (total < 0) {
        std::size_t n = 1;
        for (int c : caps) n = saturating_mul(n, static_cast<std::size_t>(c + 1));
        return n;
    }
    // ways[s] = number of partial vectors with sum s
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    for (int cap : caps) {
        std::vector<double> next(ways.size(), 0.0);
        const int limit = cap < 0 ? total : std::min(cap, total);
        for (std::size_t s = 0; s < ways.size(); ++s)
            for (int k = 0; k <= limit && s + static_cast<std::size_t>(k) < ways.size(); ++k)
                next[s + static_cast<std::size_t>(k)] += ways[s];
        ways = std::move(next);
    }
    double n = 0.0;
    for (double w : ways) n += w;
    if (n > 1e18) return std::numeric_limits<std::size_t>::max();
    return static_cast<std::size_t>(n);
}

int total_depth_of(const HeomConfig& cfg)
{
    if (const auto* td = std::get_if<TotalDepth>(&cfg.truncation)) return td->depth;
    return -1;
}

void enumerate(std::vector<int>& current, std::size_t pos, int remaining, const std::vector<int>& caps,
               std::vector<std::vector<int>>& out)
{
    if (pos == current.size()) {
        out.push_back(current);
        return;
    }
    int limit = caps[pos] < 0 ? remaining : caps[pos];
    if (remaining >= 0) limit = std::min(limit, remaining);
    for (int k = 0; k <= limit; ++k) {
        current[pos] = k;
        enumerate(current, pos + 1, remaining < 0 ? -1 : remaining - k, caps, out);
    }
    current[pos] = 0;
}

} // namespace

std::vector<HeomMode> heom_modes(const ExpFit& fit)
{
    std::vector<HeomMode> raw;
    for (const auto& term : fit.terms) {
        if (!(term.nu.real() > 0.0)) throw ValidationError("exponential fit has a non-decaying rate");
        raw.push_back({term.nu, term.alpha, 0.0});
        raw.push_back({std::conj(term.nu), 0.0, std::conj(term.alpha)});
    }
    std::vector<HeomMode> merged;
    for (const auto& m : raw) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](const HeomMode& x) {
            return std::abs(x.gamma - m.gamma) <= 1e-10 * std::max(1.0, std::abs(m.gamma));
        });
        if (it == merged.end()) {
            merged.push_back(m);
        } else {
            it->eta += m.eta;
            it->eta_bar += m.eta_bar;
        }
    }
    return merged;
}

std::vector<int> mode_depths(const std::vector<HeomMode>& modes, const HeomConfig& cfg)
{
    if (const auto* td = std::get_if<TotalDepth>(&cfg.truncation)) {
        if (td->depth < 1) throw ValidationError("HEOM total depth must be at least 1");
        return std::vector<int>(modes.size(), -1);
    }
    const auto& pm = std::get<PerModeDepth>(cfg.truncation);
    if (pm.l_min < 1 || pm.l_max < pm.l_min) throw ValidationError("HEOM per-mode depth needs L_max >= L_min >= 1");
    double nu_min = std::numeric_limits<double>::infinity();
    for (const auto& m : modes) nu_min = std::min(nu_min, m.gamma.real());
    std::vector<int> caps;
    caps.reserve(modes.size());
    for (const auto& m : modes) {
        const double scaled = std::floor(pm.l_max * nu_min / m.gamma.real());
        caps.push_back(std::min(pm.l_max, std::max(pm.l_min, static_cast<int>(scaled))));
    }
    return caps;
}

std::size_t heom_hierarchy_size(const ExpFit& fit, const HeomConfig& cfg)
{
    const auto modes = heom_modes(fit);
    return count_ados(mode_depths(modes, cfg), total_depth_of(cfg));
}

HeomGenerator::HeomGenerator(const SystemSpec& sys, const ExpFit& fit, const HeomConfig& cfg)
    : modes_(heom_modes(fit)), liouvillian_(-kI * commutator_superop(sys.hamiltonian()))
{
    const auto caps = mode_depths(modes_, cfg);
    const int total = total_depth_of(cfg);
    const std::size_t size = count_ados(caps, total);
    if (size > cfg.max_ados) {
        const double mib = static_cast<double>(size) * 16.0 * sizeof(cplx) * 6.0 / (1024.0 * 1024.0);
        throw BudgetError("HEOM hierarchy needs " + std::to_string(size) + " auxiliary operators (~" +
                          std::to_string(static_cast<long long>(mib)) + " MiB of integrator state), budget is " +
                          std::to_string(cfg.max_ados));
    }

    std::vector<std::vector<int>> indices;
    indices.reserve(size);
    std::vector<int> current(modes_.size(), 0);
    enumerate(current, 0, total, caps, indices);

    std::unordered_map<std::vector<int>, std::size_t, VectorHash> lookup;
    lookup.reserve(indices.size());
    for (std::size_t a = 0; a < indices.size(); ++a) lookup.emplace(indices[a], a);

    std::vector<double> scale(modes_.size());
    for (std::size_t j = 0; j < modes_.size(); ++j) {
        const double s = std::sqrt(std::abs(modes_[j].eta) + std::abs(modes_[j].eta_bar));
        scale[j] = s > 0.0 ? s : 1.0;
    }

    gamma_sum_.resize(indices.size());
    link_offset_.reserve(indices.size() + 1);
    link_offset_.push_back(0);
    for (std::size_t a = 0; a < indices.size(); ++a) {
        auto idx = indices[a];
        cplx g{0.0, 0.0};
        for (std::size_t j = 0; j < modes_.size(); ++j) g += static_cast<double>(idx[j]) * modes_[j].gamma;
        gamma_sum_[a] = g;

        for (std::size_t j = 0; j < modes_.size(); ++j) {
            const double n = idx[j];
            // Deeper neighbour: -i sqrt(n+1) s_j [V, rho_up]
            idx[j] += 1;
            if (auto it = lookup.find(idx); it != lookup.end()) {
                Link link{it->second, {}};
                const cplx c = -kI * std::sqrt(n + 1.0) * scale[j];
                for (int r = 0; r < 4; ++r) link.row_factor[r] = c * (kLeftSign[r] - kRightSign[r]);
                links_.push_back(link);
            }
            idx[j] -= 1;
            // Shallower neighbour: -i sqrt(n)/s_j (eta V rho_down - eta_bar rho_down V)
            if (idx[j] > 0) {
                idx[j] -= 1;
                const auto it = lookup.find(idx);
                idx[j] += 1;
                Link link{it->second, {}};
                const cplx c = -kI * std::sqrt(n) / scale[j];
                for (int r = 0; r < 4; ++r)
                    link.row_factor[r] = c * (modes_[j].eta * kLeftSign[r] - modes_[j].eta_bar * kRightSign[r]);
                links_.push_back(link);
            }
        }
        link_offset_.push_back(links_.size());
    }
}

void HeomGenerator::apply(const cplx* in, cplx* out) const
{
    const std::size_t n_ado = ado_count();
    const Superoperator& l = liouvillian_;
    for (std::size_t a = 0; a < n_ado; ++a) {
        const cplx* x = in + 16 * a;
        cplx* y = out + 16 * a;
        const cplx g = gamma_sum_[a];
        for (int c = 0; c < 4; ++c) {
            const cplx* xc = x + 4 * c;
            for (int r = 0; r < 4; ++r)
                y[r + 4 * c] = l(r, 0) * xc[0] + l(r, 1) * xc[1] + l(r, 2) * xc[2] + l(r, 3) * xc[3] - g * xc[r];
        }
        for (std::size_t k = link_offset_[a]; k < link_offset_[a + 1]; ++k) {
            const Link& link = links_[k];
            const cplx* z = in + 16 * link.target;
            for (int c = 0; c < 4; ++c)
                for (int r = 0; r < 4; ++r) y[r + 4 * c] += link.row_factor[r] * z[r + 4 * c];
        }
    }
}

MapTrajectory heom_propagate(const SystemSpec& sys, const ExpFit& fit, const HeomConfig& cfg, double dt,
                             std::size_t n_steps)
{
    if (!(dt > 0.0)) throw ValidationError("HEOM output dt must be positive");
    const double step = cfg.step > 0.0 ? cfg.step : dt;
    const double ratio = dt / step;
    const double substeps_d = std::round(ratio);
    if (substeps_d < 1.0 || std::abs(ratio - substeps_d) > 1e-9 * ratio)
        throw ValidationError("HEOM output dt must be an integer multiple of the integrator step");
    const auto substeps = static_cast<std::size_t>(substeps_d);
    const double h = dt / substeps_d;

    const HeomGenerator gen(sys, fit, cfg);
    const std::size_t n = gen.state_size();
    std::vector<cplx> y(n, 0.0), k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (int d = 0; d < 4; ++d) y[static_cast<std::size_t>(d + 4 * d)] = 1.0;

    auto root_block = [&]() {
        Superoperator u;
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 4; ++r) u(r, c) = y[static_cast<std::size_t>(r + 4 * c)];
        return u;
    };

    MapTrajectory traj{dt, {}};
    traj.maps.reserve(n_steps + 1);
    traj.maps.push_back(Superoperator::Identity());
    for (std::size_t step_out = 0; step_out < n_steps; ++step_out) {
        for (std::size_t sub = 0; sub < substeps; ++sub) {
            gen.apply(y.data(), k1.data());
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
            gen.apply(tmp.data(), k2.data());
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
            gen.apply(tmp.data(), k3.data());
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
            gen.apply(tmp.data(), k4.data());
            for (std::size_t i = 0; i < n; ++i) y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        const Superoperator u = root_block();
        if (!u.allFinite()) throw ConvergenceError("HEOM integration diverged; reduce the integrator step");
        traj.maps.push_back(u);
    }
    return traj;
}

} // namespace gqme
