#include "gqme_cli/commands.hpp"

#include <cmath>
#include <future>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "gqme/convergence.hpp"
#include "gqme/discrete_gqme.hpp"
#include "gqme/errors.hpp"
#include "gqme/exact_diag.hpp"
#include "gqme/io.hpp"
#include "gqme/kernel_bridge.hpp"
#include "gqme/volterra.hpp"

namespace gqme::cli {

using nlohmann::json;

namespace {

std::size_t steps_for(double t, double dt) { return static_cast<std::size_t>(std::llround(t / dt)); }

SystemSpec resolve_system(const FileMetadata* meta, const SystemOverride& o, const fs::path& file)
{
    if (!meta && (!o.epsilon || !o.omega))
        throw ValidationError(file.string() + " has no sidecar; pass --epsilon and --omega");
    SystemSpec sys = meta ? meta->system : SystemSpec{};
    if (o.epsilon) sys.epsilon = *o.epsilon;
    if (o.omega) sys.omega = *o.omega;
    return sys;
}

MpdiNormalization mpdi_norm(const std::string& name)
{
    if (name == "literal") return MpdiNormalization::Literal;
    if (name == "endpoint") return MpdiNormalization::EndpointFullWeight;
    throw ValidationError("MPD/I normalization must be literal or endpoint (got '" + name + "')");
}

std::string file_kind(const fs::path& p)
{
    if (has_metadata(p)) return read_metadata(p).kind;
    return "TRAJECTORY"; // the only format readable without a sidecar besides states
}

// Fine continuous kernel from either a CONTINUOUS kernel file or a trajectory.
KernelSeries load_fine_kernel(const fs::path& p, const Operator& h, std::ostream& log)
{
    const std::string kind = file_kind(p);
    if (kind == "CONTINUOUS") return read_kernels(p);
    if (kind == "TRAJECTORY") {
        Warnings w;
        KernelSeries k = extract_continuous_kernel(read_trajectory(p), h, {}, &w);
        for (const auto& m : w) log << "warning: " << m << "\n";
        return k;
    }
    throw ValidationError(p.string() + ": fine reference must be a CONTINUOUS kernel or a trajectory (kind " + kind + ")");
}

void check_finite(const MapTrajectory& traj, const char* what)
{
    for (const auto& u : traj.maps)
        if (!u.allFinite()) throw ConvergenceError(std::string(what) + " produced non-finite maps");
}

std::string describe_norms(const KernelSeries& ks)
{
    double peak = 0.0;
    for (const auto& k : ks.kernels) peak = std::max(peak, frob_norm(k));
    std::ostringstream s;
    s << ks.size() << " kernels (" << to_string(ks.kind) << ", dt = " << ks.dt << "), |K_0|_F = "
      << (ks.size() ? frob_norm(ks.kernels[0]) : 0.0) << ", max |K_N|_F = " << peak;
    return s.str();
}

// ------------------------------------------------------------ comparisons

struct Series {
    double dt = 0.0;
    double offset = 0.0; // entry i sits at (i + offset) dt
    std::vector<Eigen::MatrixXcd> values;
};

// A trajectory compared against states is projected onto rho0 first.
Series load_series(const fs::path& p, std::string& category, const std::optional<DensityMatrix>& project)
{
    const std::string kind = file_kind(p);
    Series s;
    if (kind == "TRAJECTORY") {
        const MapTrajectory t = read_trajectory(p);
        s.dt = t.dt;
        if (project) {
            category = "states";
            for (const auto& r : propagate_state(t, *project)) s.values.emplace_back(r);
        } else {
            category = "trajectory";
            for (const auto& u : t.maps) s.values.emplace_back(u);
        }
    } else if (kind == "STATES") {
        FileMetadata meta;
        const StateSeries st = read_states(p, &meta);
        category = "states";
        s.dt = meta.dt;
        for (const auto& r : st) s.values.emplace_back(r);
    } else {
        const KernelSeries k = read_kernels(p);
        category = "kernels";
        s.dt = k.dt;
        s.offset = k.kind == KernelKind::ContinuousHalf ? 0.5 : 0.0;
        for (const auto& m : k.kernels) s.values.emplace_back(m);
    }
    if (!(s.dt > 0.0)) throw ValidationError(p.string() + ": grid spacing unknown");
    return s;
}

} // namespace

// ---------------------------------------------------------------- simulate

void cmd_simulate(const SimulateConfig& cfg, std::ostream& log)
{
    validate(cfg);
    FileMetadata meta;
    meta.scheme = cfg.engine;
    meta.dt = cfg.dt;
    meta.system = cfg.system;
    meta.seed = cfg.seed;
    meta.provenance = "gqme simulate " + to_json(cfg).dump();

    MapTrajectory traj;
    if (cfg.engine == "closed") {
        const Superoperator gen = cplx(0.0, -1.0) * commutator_superop(cfg.system.hamiltonian());
        traj.dt = cfg.dt;
        for (std::size_t n = 0; n <= cfg.steps; ++n) traj.maps.push_back(expm(gen, cfg.dt * static_cast<double>(n)));
    } else if (cfg.engine == "pure-dephasing") {
        traj = pure_dephasing_analytic(cfg.system, cfg.bath, cfg.dt, cfg.steps);
    } else if (cfg.engine == "exact-diag") {
        ExactDiagOptions o;
        o.fock.thermal = cfg.exact_diag.thermal_fock;
        o.max_dimension = cfg.exact_diag.max_dimension;
        traj = exact_diag_reference(cfg.system, cfg.bath, cfg.exact_diag.n_modes, cfg.exact_diag.fock_cutoff, cfg.dt,
                                    cfg.steps, o);
        meta.notes["n_modes"] = std::to_string(cfg.exact_diag.n_modes);
        log << "exact-diag: " << cfg.exact_diag.n_modes << " modes\n";
    } else {
        ExpFit fit;
        if (!cfg.heom.bath_file.empty()) {
            fit = read_bath_coefficients(cfg.heom.bath_file);
            log << "heom: " << fit.terms.size() << " bath terms from " << cfg.heom.bath_file << "\n";
        } else {
            FitOptions fo;
            Warnings w;
            fit = fit_exponentials(cfg.bath, cfg.heom.n_exp, cfg.heom.fit_horizon, fo, &w);
            for (const auto& m : w) log << "warning: " << m << "\n";
            log << "heom: K = " << cfg.heom.n_exp << " fit, relative residual " << fit.relative_residual << "\n";
            meta.notes["fit_residual"] = format_double(fit.relative_residual);
        }
        if (!cfg.heom.write_bath.empty()) write_bath_coefficients(cfg.heom.write_bath, fit);
        HeomConfig hc;
        if (cfg.heom.per_mode)
            hc.truncation = *cfg.heom.per_mode;
        else
            hc.truncation = TotalDepth{cfg.heom.depth};
        hc.step = cfg.heom.step;
        hc.max_ados = cfg.heom.max_ados;
        const std::size_t ados = heom_hierarchy_size(fit, hc);
        log << "heom: " << ados << " auxiliary density operators\n";
        meta.notes["ados"] = std::to_string(ados);
        traj = heom_propagate(cfg.system, fit, hc, cfg.dt, cfg.steps);
        check_finite(traj, "HEOM");
        const double defect = max_trace_defect(traj);
        log << "heom: max trace defect " << defect << "\n";
        if (defect > 1e-6) throw ConvergenceError("HEOM trace defect " + std::to_string(defect) + " exceeds 1e-6");
        if (cfg.heom.depth_check && !cfg.heom.per_mode && cfg.heom.depth > 2) {
            HeomConfig lower = hc;
            lower.truncation = TotalDepth{cfg.heom.depth - 2};
            const double diff = max_elementwise_error(heom_propagate(cfg.system, fit, lower, cfg.dt, cfg.steps), traj);
            log << "heom: depth " << cfg.heom.depth - 2 << " vs " << cfg.heom.depth << " max difference " << diff << "\n";
            meta.notes["depth_check"] = format_double(diff);
        }
    }
    write_trajectory(cfg.output, traj, meta);
    log << "wrote " << traj.size() << " maps to " << cfg.output << "\n";
}

// ----------------------------------------------------------------- extract

void cmd_extract(const ExtractOptions& opts, std::ostream& log)
{
    if (opts.output.empty()) throw ValidationError("extract: no output file given (-o)");
    FileMetadata in_meta;
    const MapTrajectory traj = read_trajectory(opts.input, &in_meta);
    const SystemSpec sys = resolve_system(has_metadata(opts.input) ? &in_meta : nullptr, opts.system, opts.input);
    const Operator h = sys.hamiltonian();

    KernelSeries ks;
    if (opts.scheme == "ttm-discrete") {
        ks = extract_discrete_kernels(traj, h);
    } else if (opts.scheme == "ttm1") {
        ks = discrete_to_continuous(extract_discrete_kernels(traj, h), Scheme::TTM1, h);
    } else if (opts.scheme == "ttm2") {
        if (opts.fine_ref.empty())
            throw ValidationError("ttm2 needs --fine-ref (a fine continuous kernel or a fine trajectory)");
        const KernelSeries fine = load_fine_kernel(opts.fine_ref, h, log);
        ks = discrete_to_continuous(extract_discrete_kernels(traj, h), Scheme::TTM2, h, make_auxiliary(fine, h, traj.dt));
    } else if (opts.scheme == "mpdi") {
        ks = mpdi_extract(traj, h, mpdi_norm(opts.mpdi_normalization)).half;
    } else if (opts.scheme == "volterra") {
        Warnings w;
        ks = extract_continuous_kernel(traj, h, {}, &w);
        for (const auto& m : w) log << "warning: " << m << "\n";
    } else {
        throw ValidationError("extract: scheme must be ttm-discrete, ttm1, ttm2, mpdi or volterra (got '" + opts.scheme +
                              "')");
    }
    for (const auto& k : ks.kernels)
        if (!k.allFinite()) throw ConvergenceError("extraction produced non-finite kernels");

    FileMetadata meta;
    meta.scheme = opts.scheme;
    meta.system = sys;
    meta.provenance = "gqme extract --scheme " + opts.scheme + " " + opts.input.string() +
                      (opts.fine_ref.empty() ? "" : " --fine-ref " + opts.fine_ref.string());
    if (opts.scheme == "mpdi") meta.notes["mpdi_normalization"] = opts.mpdi_normalization;
    write_kernels(opts.output, ks, meta);
    log << "extract: " << describe_norms(ks) << "\n";
}

// --------------------------------------------------------------- propagate

void cmd_propagate(const PropagateOptions& opts, std::ostream& log)
{
    if (opts.output.empty() && opts.maps_output.empty())
        throw ValidationError("propagate: no output file given (-o and/or --maps)");
    FileMetadata in_meta;
    const KernelSeries ks = read_kernels(opts.input, &in_meta);
    const SystemSpec sys = resolve_system(&in_meta, opts.system, opts.input);
    const Operator h = sys.hamiltonian();
    const DensityMatrix rho0 = parse_rho0(opts.rho0);

    const double dt = opts.dt.value_or(ks.dt);
    if (!(dt > 0.0)) throw ValidationError("propagate: --dt must be positive");
    std::size_t n_steps = 0;
    if (opts.steps)
        n_steps = *opts.steps;
    else if (opts.t_end)
        n_steps = steps_for(*opts.t_end, dt);
    else
        throw ValidationError("propagate: give --steps or --t-end");
    if (n_steps < 1) throw ValidationError("propagate: need at least one step");

    const MemoryTruncation trunc = opts.t_mem ? MemoryTruncation::at(*opts.t_mem) : MemoryTruncation::none();
    const std::size_t n_t = trunc.steps(dt).value_or(n_steps);

    auto need_kind = [&](KernelKind want, const char* what) {
        if (ks.kind != want)
            throw ValidationError("scheme " + opts.scheme + " needs " + what + " kernels; " + opts.input.string() +
                                  " holds " + to_string(ks.kind));
    };

    MapTrajectory maps;
    if (opts.scheme == "fdio" || opts.scheme == "ttm1" || opts.scheme == "ttm2") {
        need_kind(KernelKind::Continuous, "CONTINUOUS");
        const std::size_t count = std::min(n_t + 1, n_steps);
        const KernelSeries kc = dt == ks.dt ? ks : sample_grid(ks, dt, count);
        const Scheme scheme = scheme_from_string(opts.scheme);
        KernelSeries kd;
        if (scheme == Scheme::TTM2) {
            KernelSeries fine;
            if (!opts.fine_ref.empty())
                fine = load_fine_kernel(opts.fine_ref, h, log);
            else if (ks.dt < dt)
                fine = ks;
            else
                throw ValidationError("ttm2 needs --fine-ref, or a kernel file finer than --dt");
            kd = continuous_to_discrete(kc, scheme, h, make_auxiliary(fine, h, dt));
        } else {
            kd = continuous_to_discrete(kc, scheme, h);
        }
        maps = propagate_discrete(kd, h, n_steps, trunc);
    } else if (opts.scheme == "ttm-discrete") {
        need_kind(KernelKind::Discrete, "DISCRETE");
        if (dt != ks.dt) throw ValidationError("discrete kernels cannot be resampled onto another step");
        maps = propagate_discrete(ks, h, n_steps, trunc);
    } else if (opts.scheme == "mpdi") {
        KernelSeries half;
        if (ks.kind == KernelKind::ContinuousHalf) {
            if (dt != ks.dt) throw ValidationError("half-grid kernels cannot be resampled onto another step");
            half = ks;
        } else {
            need_kind(KernelKind::Continuous, "CONTINUOUS_HALF or CONTINUOUS");
            const HalfGridSample s = sample_half_grid(ks, dt, std::min(n_t, n_steps));
            if (s.interpolated) log << "warning: half-grid kernel values interpolated from the fine grid\n";
            half = s.half;
        }
        maps = mpdi_propagate(half, h, n_steps, trunc, mpdi_norm(opts.mpdi_normalization));
    } else {
        throw ValidationError("propagate: scheme must be fdio, ttm1, ttm2, mpdi or ttm-discrete (got '" + opts.scheme +
                              "')");
    }
    check_finite(maps, "propagation");

    FileMetadata meta;
    meta.scheme = opts.scheme;
    meta.dt = dt;
    meta.system = sys;
    meta.provenance = "gqme propagate --scheme " + opts.scheme + " " + opts.input.string();
    if (opts.t_mem) meta.notes["t_mem"] = format_double(*opts.t_mem);
    meta.notes["rho0"] = opts.rho0;
    if (!opts.output.empty()) write_states(opts.output, propagate_state(maps, rho0), meta);
    if (!opts.maps_output.empty()) write_trajectory(opts.maps_output, maps, meta);
    log << "propagate: " << n_steps << " steps of dt = " << dt << " with " << opts.scheme
        << (opts.t_mem ? ", t_mem = " + format_double(*opts.t_mem) : std::string(", full memory"))
        << ", max trace defect " << max_trace_defect(maps) << "\n";
}

// ----------------------------------------------------------------- compare

CompareResult cmd_compare(const CompareOptions& opts, std::ostream& log)
{
    if (opts.norm != "frobenius" && opts.norm != "max")
        throw ValidationError("compare: --norm must be frobenius or max (got '" + opts.norm + "')");
    // States against a trajectory: project the trajectory onto the states' rho0.
    std::optional<DensityMatrix> project;
    const std::string kind_a = file_kind(opts.a), kind_b = file_kind(opts.b);
    if ((kind_a == "STATES") != (kind_b == "STATES") && (kind_a == "TRAJECTORY" || kind_b == "TRAJECTORY")) {
        std::string spec = opts.rho0;
        if (spec.empty()) {
            const FileMetadata meta = read_metadata(kind_a == "STATES" ? opts.a : opts.b);
            const auto it = meta.notes.find("rho0");
            spec = it != meta.notes.end() ? it->second : "pop0";
        }
        project = parse_rho0(spec);
        log << "compare: projecting the trajectory onto rho0 = " << spec << "\n";
    }
    std::string cat_a, cat_b;
    const Series a = load_series(opts.a, cat_a, kind_a == "TRAJECTORY" ? project : std::nullopt);
    const Series b = load_series(opts.b, cat_b, kind_b == "TRAJECTORY" ? project : std::nullopt);
    if (cat_a != cat_b) throw ValidationError("compare: cannot compare " + cat_a + " with " + cat_b);

    // Walk the coarser series and look each time up on the finer grid.
    const bool a_coarse = a.dt >= b.dt;
    const Series& coarse = a_coarse ? a : b;
    const Series& fine = a_coarse ? b : a;
    grid_stride(coarse.dt, fine.dt); // throws on incommensurate grids

    CompareResult r;
    for (std::size_t i = 0; i < coarse.values.size(); ++i) {
        const double t = (static_cast<double>(i) + coarse.offset) * coarse.dt;
        const double x = t / fine.dt - fine.offset;
        const double j = std::round(x);
        if (std::abs(x - j) > 1e-7 * std::max(1.0, x) || j < 0.0)
            throw ValidationError("compare: time " + format_double(t) + " is not on the grid of the finer file");
        const auto idx = static_cast<std::size_t>(j);
        if (idx >= fine.values.size()) break;
        const Eigen::MatrixXcd d = coarse.values[i] - fine.values[idx];
        r.t.push_back(t);
        r.error.push_back(opts.norm == "max" ? d.cwiseAbs().maxCoeff() : d.norm());
    }
    if (r.error.empty()) throw ValidationError("compare: the files share no time points");
    r.time_average = time_average(r.error);
    for (double e : r.error) r.max = std::max(r.max, e);

    if (!opts.output.empty()) {
        std::ostringstream csv;
        csv << "t,error,log10_error\n";
        for (std::size_t i = 0; i < r.t.size(); ++i)
            csv << format_double(r.t[i]) << ',' << format_double(r.error[i]) << ','
                << (r.error[i] > 0.0 ? format_double(std::log10(r.error[i])) : std::string("-inf")) << '\n';
        csv << "# time_average," << format_double(r.time_average) << ','
            << (r.time_average > 0.0 ? format_double(std::log10(r.time_average)) : std::string("-inf")) << '\n';
        atomic_write(opts.output, csv.str());
    }
    log << "compare: " << r.t.size() << " aligned points (" << cat_a << ", stride " << grid_stride(coarse.dt, fine.dt)
        << "), " << opts.norm << " norm: max " << r.max << ", time average " << r.time_average << "\n";
    return r;
}

// ------------------------------------------------------------------- sweep

namespace {

struct RunResult {
    std::string scheme;
    double dt = 0.0;
    double error = 0.0;        // headline metric
    double time_average = 0.0; // mean of the series
    std::vector<double> times;
    std::vector<double> series;
};

RunResult kernel_run(const MapTrajectory& fine, const KernelSeries& kc_ref, const Operator& h, const std::string& scheme,
                     double dt, double t_mem, MpdiNormalization norm)
{
    const std::size_t n_mem = steps_for(t_mem, dt);
    RunResult r{scheme, dt, 0.0, 0.0, {}, {}};
    KernelSeries kc;
    if (scheme == "mpdi") {
        kc = mpdi_extract(sample_grid(fine, dt, n_mem + 1), h, norm).half;
    } else {
        const Scheme s = scheme_from_string(scheme);
        const KernelSeries kd = extract_discrete_kernels(sample_grid(fine, dt, n_mem + 2), h);
        kc = s == Scheme::TTM2 ? discrete_to_continuous(kd, s, h, make_auxiliary(kc_ref, h, dt))
                               : discrete_to_continuous(kd, s, h);
    }
    r.series = kernel_errors(kc, kc_ref);
    const std::size_t keep = scheme == "mpdi" ? n_mem : n_mem + 1;
    if (r.series.size() > keep) r.series.resize(keep);
    for (std::size_t i = 0; i < r.series.size(); ++i) r.times.push_back(kc.time(i));
    // Integer grids skip N = 0: the headline is max over 0 < N <= N_mem.
    for (std::size_t i = (kc.kind == KernelKind::ContinuousHalf ? 0 : 1); i < r.series.size(); ++i)
        r.error = std::max(r.error, r.series[i]);
    r.time_average = time_average(r.series);
    return r;
}

RunResult dynamics_run(const KernelSeries& kc_ref, const StateSeries& ref, double ref_dt, const Operator& h,
                       const std::string& scheme, double dt, const SweepConfig& cfg, const DensityMatrix& rho0)
{
    const std::size_t n = steps_for(cfg.t_end, dt);
    const std::size_t n_mem = steps_for(cfg.t_mem, dt);
    const MemoryTruncation trunc = MemoryTruncation::at(cfg.t_mem);
    MapTrajectory maps;
    if (scheme == "mpdi") {
        const KernelSeries half = sample_half_grid(kc_ref, dt, std::min(n_mem, n)).half;
        maps = mpdi_propagate(half, h, n, trunc, mpdi_norm(cfg.mpdi_normalization));
    } else {
        const Scheme s = scheme_from_string(scheme);
        const KernelSeries kc = sample_grid(kc_ref, dt, std::min(n_mem + 1, n));
        const KernelSeries kd = s == Scheme::TTM2 ? continuous_to_discrete(kc, s, h, make_auxiliary(kc_ref, h, dt))
                                                  : continuous_to_discrete(kc, s, h);
        maps = propagate_discrete(kd, h, n, trunc);
    }
    const StateSeries states = propagate_state(maps, rho0);
    RunResult r{scheme, dt, 0.0, 0.0, {}, {}};
    r.series = state_errors(states, dt, ref, ref_dt);
    const double step = std::max(dt, ref_dt);
    for (std::size_t i = 0; i < r.series.size(); ++i) r.times.push_back(step * static_cast<double>(i));
    r.error = max_elementwise_error(states, dt, ref, ref_dt);
    r.time_average = time_average(r.series);
    return r;
}

// Exponential memory K(t) = exp(-g t) B: (U, int K U) obey a linear ODE, so the
// maps are exact and the Volterra round trip error is pure discretization.
RunResult manufactured_run(std::uint64_t seed, double dt)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Operator h;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) h(i, j) = cplx(nd(rng), nd(rng));
    h = 0.5 * (h + h.adjoint()).eval();
    Superoperator kb;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) kb(i, j) = cplx(nd(rng), nd(rng));
    const double g = 1.3, horizon = 2.0;

    Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(8, 8);
    gen.topLeftCorner(4, 4) = cplx(0.0, -1.0) * commutator_superop(h);
    gen.topRightCorner(4, 4).setIdentity();
    gen.bottomLeftCorner(4, 4) = kb;
    gen.bottomRightCorner(4, 4) = -g * Eigen::MatrixXcd::Identity(4, 4);
    const Eigen::MatrixXcd step = (gen * dt).exp();

    const std::size_t n = steps_for(horizon, dt);
    MapTrajectory exact{dt, {}};
    Eigen::MatrixXcd state = Eigen::MatrixXcd::Zero(8, 4);
    state.topRows(4).setIdentity();
    for (std::size_t k = 0; k <= n; ++k) {
        exact.maps.push_back(state.topRows(4));
        state = step * state;
    }
    const MapTrajectory back = propagate_continuous(extract_continuous_kernel(exact, h), h, n);
    RunResult r{"volterra", dt, 0.0, 0.0, {}, {}};
    for (std::size_t k = 0; k <= n; ++k) {
        r.times.push_back(exact.time(k));
        r.series.push_back((back.maps[k] - exact.maps[k]).cwiseAbs().maxCoeff());
        r.error = std::max(r.error, r.series.back());
    }
    r.time_average = time_average(r.series);
    return r;
}

void write_table(const fs::path& dir, const RunResult& r)
{
    std::ostringstream csv;
    csv << "index,t,error\n";
    for (std::size_t i = 0; i < r.series.size(); ++i)
        csv << i << ',' << format_double(r.times[i]) << ',' << format_double(r.series[i]) << '\n';
    std::ostringstream name;
    name << "sweep_" << r.scheme << "_dt" << r.dt << ".csv"; // default stream precision: short labels
    atomic_write(dir / name.str(), csv.str());
}

} // namespace

json cmd_sweep(const SweepConfig& cfg_in, std::ostream& log)
{
    SweepConfig cfg = cfg_in;
    if (cfg.schemes.empty()) {
        if (cfg.mode == "kernel") cfg.schemes = {"ttm1", "ttm2", "mpdi"};
        if (cfg.mode == "dynamics") cfg.schemes = {"fdio", "ttm1", "ttm2", "mpdi"};
        if (cfg.mode == "manufactured") cfg.schemes = {"volterra"};
    }
    validate(cfg);
    for (const auto& s : cfg.schemes) {
        const bool ok = cfg.mode == "manufactured" ? s == "volterra"
                                                   : (s == "fdio" || s == "ttm1" || s == "ttm2" || s == "mpdi");
        if (!ok) throw ValidationError("sweep: scheme '" + s + "' is not available in mode " + cfg.mode);
    }
    const MpdiNormalization norm = mpdi_norm(cfg.mpdi_normalization);

    MapTrajectory fine;
    KernelSeries kc_ref;
    Operator h = Operator::Zero();
    StateSeries ref_states;
    double ref_dt = 0.0;
    if (cfg.mode != "manufactured") {
        FileMetadata meta;
        fine = read_trajectory(cfg.reference, &meta);
        h = resolve_system(has_metadata(cfg.reference) ? &meta : nullptr, {}, cfg.reference).hamiltonian();
        kc_ref = extract_continuous_kernel(fine, h);
        log << "sweep: reference kernel from " << cfg.reference << " (dt = " << fine.dt << ", " << kc_ref.size()
            << " points)\n";
        if (cfg.mode == "dynamics") {
            const MapTrajectory long_ref = read_trajectory(cfg.dynamics_reference);
            ref_states = propagate_state(long_ref, parse_rho0(cfg.rho0));
            ref_dt = long_ref.dt;
        }
    }
    const DensityMatrix rho0 = parse_rho0(cfg.rho0);

    std::vector<std::future<RunResult>> jobs;
    for (const auto& scheme : cfg.schemes)
        for (double dt : cfg.dts)
            jobs.push_back(std::async(std::launch::async, [&, scheme, dt] {
                if (cfg.mode == "kernel") return kernel_run(fine, kc_ref, h, scheme, dt, cfg.t_mem, norm);
                if (cfg.mode == "dynamics") return dynamics_run(kc_ref, ref_states, ref_dt, h, scheme, dt, cfg, rho0);
                return manufactured_run(cfg.seed, dt);
            }));

    std::vector<RunResult> runs;
    for (auto& j : jobs) runs.push_back(j.get());
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        for (const auto& r : runs) write_table(cfg.output_dir, r);
    }

    json report{{"mode", cfg.mode},
                {"tool_version", version()},
                {"seed", cfg.seed},
                {"t_mem", cfg.t_mem},
                {"reference", cfg.reference},
                {"runs", json::array()},
                {"fits", json::object()}};
    for (const auto& r : runs) {
        json run{{"scheme", r.scheme}, {"dt", r.dt}, {"error", r.error}, {"time_average", r.time_average}};
        if (r.series.size() >= 4) {
            const Plateau p = detect_plateau(r.series);
            run["plateau"] = {{"found", p.found}, {"level", p.level}, {"spread", p.spread}, {"start", p.start}};
        }
        report["runs"].push_back(run);
    }
    for (const auto& scheme : cfg.schemes) {
        std::vector<double> dts, errs;
        for (const auto& r : runs)
            if (r.scheme == scheme) {
                dts.push_back(r.dt);
                errs.push_back(r.error);
            }
        json entry{{"dts", dts}, {"errors", errs}};
        bool positive = true;
        for (double e : errs) positive = positive && e > 0.0;
        if (positive) {
            const OrderFit f = fit_order(dts, errs);
            entry["order"] = f.order;
            entry["r_squared"] = f.r_squared;
            log << "sweep: " << scheme << " order " << std::fixed << std::setprecision(3) << f.order << " (R^2 "
                << std::setprecision(4) << f.r_squared << ")" << std::defaultfloat << std::setprecision(6) << "\n";
        } else {
            log << "sweep: " << scheme << " has zero errors; no order fit\n";
        }
        report["fits"][scheme] = entry;
    }
    if (!cfg.report.empty()) atomic_write(cfg.report, report.dump(2) + "\n");
    return report;
}

// --------------------------------------------------------------------- run

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Generalized quantum master equation and transfer tensor toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a reference trajectory of dynamical maps");
    std::string sim_config;
    std::string sim_output, sim_engine, sim_bath_file;
    std::optional<double> sim_dt, sim_eps, sim_omega;
    std::optional<std::size_t> sim_steps, sim_n_exp, sim_modes;
    std::optional<int> sim_depth;
    std::optional<std::uint64_t> sim_seed;
    bool sim_depth_check = false;
    sim->add_option("-c,--config", sim_config, "JSON configuration file");
    sim->add_option("-o,--output", sim_output, "Trajectory CSV to write");
    sim->add_option("--engine", sim_engine, "heom | exact-diag | pure-dephasing | closed");
    sim->add_option("--dt", sim_dt, "Output time step");
    sim->add_option("--steps", sim_steps, "Number of output steps");
    sim->add_option("--epsilon", sim_eps, "System bias");
    sim->add_option("--omega", sim_omega, "System tunnelling");
    sim->add_option("--seed", sim_seed, "Seed recorded in the metadata");
    sim->add_option("--depth", sim_depth, "HEOM total depth");
    sim->add_option("--n-exp", sim_n_exp, "HEOM bath exponentials");
    sim->add_option("--bath-file", sim_bath_file, "HEOM bath coefficients (skip fitting)");
    sim->add_option("--modes", sim_modes, "Exact-diagonalization bath modes");
    sim->add_flag("--depth-check", sim_depth_check, "Rerun HEOM at depth - 2 and report the difference");

    // extract
    auto* ext = app.add_subcommand("extract", "Extract memory kernels from a trajectory");
    ExtractOptions eo;
    ext->add_option("input", eo.input, "Trajectory CSV")->required();
    ext->add_option("-o,--output", eo.output, "Kernel CSV to write")->required();
    ext->add_option("--scheme", eo.scheme, "ttm-discrete | ttm1 | ttm2 | mpdi | volterra")->required();
    ext->add_option("--fine-ref", eo.fine_ref, "Fine kernel or trajectory (ttm2)");
    ext->add_option("--mpdi-normalization", eo.mpdi_normalization, "literal | endpoint");
    ext->add_option("--epsilon", eo.system.epsilon, "Override the system bias");
    ext->add_option("--omega", eo.system.omega, "Override the system tunnelling");

    // propagate
    auto* prop = app.add_subcommand("propagate", "Propagate dynamics from a kernel file");
    PropagateOptions po;
    prop->add_option("input", po.input, "Kernel CSV")->required();
    prop->add_option("-o,--output", po.output, "State CSV to write");
    prop->add_option("--maps", po.maps_output, "Map trajectory CSV to write");
    prop->add_option("--scheme", po.scheme, "fdio | ttm1 | ttm2 | mpdi | ttm-discrete")->required();
    prop->add_option("--fine-ref", po.fine_ref, "Fine kernel or trajectory (ttm2)");
    prop->add_option("--tmem,--t-mem", po.t_mem, "Memory cutoff time");
    prop->add_option("--dt", po.dt, "Propagation step (resamples continuous kernels)");
    prop->add_option("--steps", po.steps, "Number of steps");
    prop->add_option("--t-end", po.t_end, "Final time (instead of --steps)");
    prop->add_option("--rho0", po.rho0, "pop0 | pop1 | plus | four complex entries");
    prop->add_option("--mpdi-normalization", po.mpdi_normalization, "literal | endpoint");
    prop->add_option("--epsilon", po.system.epsilon, "Override the system bias");
    prop->add_option("--omega", po.system.omega, "Override the system tunnelling");

    // compare
    auto* cmp = app.add_subcommand("compare", "Per-time error table between two files");
    CompareOptions co;
    cmp->add_option("a", co.a, "First file")->required();
    cmp->add_option("b", co.b, "Second file")->required();
    cmp->add_option("-o,--output", co.output, "Error table CSV to write");
    cmp->add_option("--norm", co.norm, "frobenius | max");
    cmp->add_option("--rho0", co.rho0, "Initial state for projecting a trajectory against states");

    // sweep
    auto* swp = app.add_subcommand("sweep", "Convergence study over a list of time steps");
    std::string swp_config, swp_report, swp_outdir, swp_mode, swp_reference;
    std::vector<double> swp_dts;
    std::vector<std::string> swp_schemes;
    std::optional<double> swp_tmem;
    swp->add_option("-c,--config", swp_config, "JSON configuration file");
    swp->add_option("--mode", swp_mode, "kernel | dynamics | manufactured");
    swp->add_option("--reference", swp_reference, "Fine reference trajectory");
    swp->add_option("--dts", swp_dts, "Time steps")->delimiter(',');
    swp->add_option("--schemes", swp_schemes, "Schemes")->delimiter(',');
    swp->add_option("--tmem,--t-mem", swp_tmem, "Memory cutoff time");
    swp->add_option("--report", swp_report, "JSON report to write (stdout otherwise)");
    swp->add_option("--output-dir", swp_outdir, "Directory for per-run error tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kSuccess : kValidation;
    }

    try {
        if (sim->parsed()) {
            SimulateConfig cfg = sim_config.empty() ? SimulateConfig{} : parse_simulate_config(load_json(sim_config));
            if (!sim_output.empty()) cfg.output = sim_output;
            if (!sim_engine.empty()) cfg.engine = sim_engine;
            if (sim_dt) cfg.dt = *sim_dt;
            if (sim_steps) cfg.steps = *sim_steps;
            if (sim_eps) cfg.system.epsilon = *sim_eps;
            if (sim_omega) cfg.system.omega = *sim_omega;
            if (sim_seed) cfg.seed = *sim_seed;
            if (sim_depth) cfg.heom.depth = *sim_depth;
            if (sim_n_exp) cfg.heom.n_exp = *sim_n_exp;
            if (!sim_bath_file.empty()) cfg.heom.bath_file = sim_bath_file;
            if (sim_modes) cfg.exact_diag.n_modes = *sim_modes;
            if (sim_depth_check) cfg.heom.depth_check = true;
            cmd_simulate(cfg, err);
        } else if (ext->parsed()) {
            cmd_extract(eo, err);
        } else if (prop->parsed()) {
            cmd_propagate(po, err);
        } else if (cmp->parsed()) {
            const CompareResult r = cmd_compare(co, err);
            if (co.output.empty()) out << "time_average," << format_double(r.time_average) << "\nmax," << format_double(r.max) << "\n";
        } else if (swp->parsed()) {
            SweepConfig cfg = swp_config.empty() ? SweepConfig{} : parse_sweep_config(load_json(swp_config));
            if (!swp_mode.empty()) cfg.mode = swp_mode;
            if (!swp_reference.empty()) cfg.reference = swp_reference;
            if (!swp_dts.empty()) cfg.dts = swp_dts;
            if (!swp_schemes.empty()) cfg.schemes = swp_schemes;
            if (swp_tmem) cfg.t_mem = *swp_tmem;
            if (!swp_report.empty()) cfg.report = swp_report;
            if (!swp_outdir.empty()) cfg.output_dir = swp_outdir;
            const json report = cmd_sweep(cfg, err);
            if (cfg.report.empty()) out << report.dump(2) << "\n";
        }
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kSuccess;
}

} // namespace gqme::cli
