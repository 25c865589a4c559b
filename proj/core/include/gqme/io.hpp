#pragma once

// File formats. Trajectories and kernels are CSV files with header
//   t_index,t,re_00,im_00,...,re_33,im_33   (row-major over the 4x4 matrix)
// plus a JSON sidecar with the same basename holding the metadata. Values
// are written with 17 significant digits, so a write/read round trip is exact.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gqme/bath.hpp"
#include "gqme/superop.hpp"

namespace gqme {

const char* version();

struct FileMetadata {
    std::string kind;        // "TRAJECTORY", "DISCRETE", "CONTINUOUS", "CONTINUOUS_HALF", "STATES"
    std::string scheme;      // producing scheme or engine, may be empty
    double dt = 0.0;
    SystemSpec system;
    std::string provenance;  // free text: command and inputs
    std::string tool_version = version();
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> notes;
};

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

// Writes to a temporary file in the same directory, then renames.
void atomic_write(const std::filesystem::path& path, const std::string& content);

void write_metadata(const std::filesystem::path& csv, const FileMetadata& meta);
FileMetadata read_metadata(const std::filesystem::path& csv);
bool has_metadata(const std::filesystem::path& csv);

void write_trajectory(const std::filesystem::path& path, const MapTrajectory& traj, FileMetadata meta);
// dt comes from the sidecar when present, otherwise from the t column.
MapTrajectory read_trajectory(const std::filesystem::path& path, FileMetadata* meta = nullptr);

void write_kernels(const std::filesystem::path& path, const KernelSeries& ks, FileMetadata meta);
// Needs the sidecar for the kernel kind.
KernelSeries read_kernels(const std::filesystem::path& path, FileMetadata* meta = nullptr);

// rho(t) series: t_index,t,re_00,im_00,re_01,im_01,re_10,im_10,re_11,im_11.
void write_states(const std::filesystem::path& path, const StateSeries& states, FileMetadata meta);
StateSeries read_states(const std::filesystem::path& path, FileMetadata* meta = nullptr);

// Bath coefficients: re_alpha,im_alpha,re_nu,im_nu per row.
void write_bath_coefficients(const std::filesystem::path& path, const ExpFit& fit);
ExpFit read_bath_coefficients(const std::filesystem::path& path);

// "pop0", "pop1", "plus", or four complex entries rho_00 rho_01 rho_10 rho_11
// separated by spaces or semicolons, each "x" or "(re,im)".
DensityMatrix parse_rho0(const std::string& spec);

// Canonical 17-significant-digit decimal form.
std::string format_double(double x);

} // namespace gqme
