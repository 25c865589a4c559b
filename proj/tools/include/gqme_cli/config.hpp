#pragma once

// JSON configuration for the gqme tool. Unknown fields are rejected with the
// dotted field path; command-line flags override fields after parsing.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gqme/bath.hpp"
#include "gqme/heom.hpp"

namespace gqme::cli {

struct HeomSettings {
    std::size_t n_exp = 3;      // exponentials in the bath fit
    double fit_horizon = 10.0;  // fit window [0, horizon]
    int depth = 10;             // total-depth truncation
    std::optional<PerModeDepth> per_mode;
    double step = 0.0;          // RK4 step, 0 = output dt
    std::size_t max_ados = 400000;
    bool depth_check = false;   // rerun at depth - 2 and report the difference
    std::string bath_file;      // read coefficients instead of fitting
    std::string write_bath;     // write the fitted coefficients here
};

struct ExactDiagSettings {
    std::size_t n_modes = 60;
    std::size_t fock_cutoff = 4;
    bool thermal_fock = true;
    std::size_t max_dimension = 1500;
};

struct SimulateConfig {
    std::string engine = "heom"; // heom | exact-diag | pure-dephasing | closed
    SystemSpec system = benchmark_system();
    SpectralDensity bath = benchmark_bath();
    double dt = 0.01;
    std::size_t steps = 100;
    HeomSettings heom;
    ExactDiagSettings exact_diag;
    std::uint64_t seed = 0;
    std::string output;
};

struct SweepConfig {
    std::string mode = "kernel";        // kernel | dynamics | manufactured
    std::string reference;              // fine trajectory (kernel and dynamics modes)
    std::string dynamics_reference;     // long trajectory on a coarse grid (dynamics mode)
    std::vector<double> dts;
    std::vector<std::string> schemes;
    double t_mem = 1.2;
    double t_end = 10.0;                // dynamics horizon
    std::string rho0 = "pop0";
    std::string mpdi_normalization = "literal";
    std::uint64_t seed = 0;             // manufactured-kernel generator
    std::string output_dir;             // per-run error tables (optional)
    std::string report;                 // JSON report path (optional; stdout otherwise)
};

nlohmann::json load_json(const std::filesystem::path& path);

SimulateConfig parse_simulate_config(const nlohmann::json& doc);
SweepConfig parse_sweep_config(const nlohmann::json& doc);

nlohmann::json to_json(const SimulateConfig& cfg);

void validate(const SimulateConfig& cfg);
void validate(const SweepConfig& cfg);

} // namespace gqme::cli
