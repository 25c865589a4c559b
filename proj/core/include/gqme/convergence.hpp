#pragma once

// Error bookkeeping for convergence studies: grid-aligned error series,
// log-log order fits and plateau detection.

#include <cstddef>
#include <span>
#include <vector>

#include "gqme/superop.hpp"

namespace gqme {

struct OrderFit {
    double order = 0.0;     // slope of log(error) vs log(dt)
    double intercept = 0.0; // log(error) at dt = 1
    double r_squared = 0.0;
};

// Least-squares line through (log x_i, log y_i). Needs >= 2 points, all positive.
OrderFit fit_order(std::span<const double> x, std::span<const double> y);

struct PlateauOptions {
    double tail_fraction = 0.5; // trailing share of the series that must be flat
    double rel_tol = 0.25;      // allowed |e - median| / median on the tail
};

struct Plateau {
    bool found = false;
    double level = 0.0;     // median of the tail
    double spread = 0.0;    // max |e - level| / level on the tail
    std::size_t start = 0;  // first index from which every entry stays within rel_tol of level
};

Plateau detect_plateau(std::span<const double> series, const PlateauOptions& opts = {});

double median(std::vector<double> values);

// Stride between two grids, fine_dt * stride == coarse_dt; throws ValidationError
// when the ratio is not an integer.
std::size_t grid_stride(double coarse_dt, double fine_dt);

// ||a_i - ref(t_i)||_F for every entry of a whose time lands on the grid of
// ref (integer or half-integer offsets both allowed), stopping where ref ends.
std::vector<double> kernel_errors(const KernelSeries& a, const KernelSeries& ref);

// ||rho_a(t_i) - rho_ref(t_i)||_F with index alignment, and the largest
// elementwise deviation.
std::vector<double> state_errors(const StateSeries& a, double dt_a, const StateSeries& ref, double dt_ref);
double max_elementwise_error(const StateSeries& a, double dt_a, const StateSeries& ref, double dt_ref);
double max_elementwise_error(const MapTrajectory& a, const MapTrajectory& ref);

double time_average(std::span<const double> values);

} // namespace gqme
