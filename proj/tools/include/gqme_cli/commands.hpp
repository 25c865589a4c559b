#pragma once

// Subcommands of the gqme tool. Each throws ValidationError for bad input and
// ConvergenceError for numerical failures; run() maps those to exit codes.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gqme_cli/config.hpp"

namespace gqme::cli {

namespace fs = std::filesystem;

enum ExitCode { kSuccess = 0, kValidation = 2, kConvergence = 3 };

// Optional Hamiltonian override; unset fields fall back to file metadata.
struct SystemOverride {
    std::optional<double> epsilon;
    std::optional<double> omega;
};

struct ExtractOptions {
    fs::path input;
    fs::path output;
    std::string scheme;   // ttm-discrete | ttm1 | ttm2 | mpdi | volterra
    fs::path fine_ref;    // fine kernel or trajectory; required for ttm2
    std::string mpdi_normalization = "literal";
    SystemOverride system;
};

struct PropagateOptions {
    fs::path input;       // kernel file
    fs::path output;      // state series
    fs::path maps_output; // optional map series
    std::string scheme;   // fdio | ttm1 | ttm2 | mpdi | ttm-discrete
    fs::path fine_ref;    // fine kernel or trajectory for ttm2 auxiliaries
    std::optional<double> t_mem;
    std::optional<double> dt;      // resample a continuous kernel onto this step
    std::optional<std::size_t> steps;
    std::optional<double> t_end;
    std::string rho0 = "pop0";
    std::string mpdi_normalization = "literal";
    SystemOverride system;
};

struct CompareOptions {
    fs::path a;
    fs::path b;
    fs::path output;             // optional error table
    std::string norm = "frobenius"; // frobenius | max
    std::string rho0;               // projects a trajectory compared with states; default from metadata
};

struct CompareResult {
    std::vector<double> t;
    std::vector<double> error;
    double time_average = 0.0;
    double max = 0.0;
};

void cmd_simulate(const SimulateConfig& cfg, std::ostream& log);
void cmd_extract(const ExtractOptions& opts, std::ostream& log);
void cmd_propagate(const PropagateOptions& opts, std::ostream& log);
CompareResult cmd_compare(const CompareOptions& opts, std::ostream& log);
nlohmann::json cmd_sweep(const SweepConfig& cfg, std::ostream& log);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gqme::cli
