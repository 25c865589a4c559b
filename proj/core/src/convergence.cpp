#include "gqme/convergence.hpp"

#include <algorithm>
#include <cmath>

#include "gqme/errors.hpp"

namespace gqme {

OrderFit fit_order(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw ValidationError("fit_order: size mismatch");
    if (x.size() < 2) throw ValidationError("fit_order: need at least 2 points");
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("fit_order: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
        sx += lx.back();
        sy += ly.back();
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("fit_order: x values must differ");
    OrderFit fit;
    fit.order = sxy / sxx;
    fit.intercept = my - fit.order * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return fit;
}

double median(std::vector<double> values)
{
    if (values.empty()) throw ValidationError("median of empty set");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

Plateau detect_plateau(std::span<const double> series, const PlateauOptions& opts)
{
    if (!(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0))
        throw ValidationError("detect_plateau: tail_fraction must be in (0, 1]");
    if (series.size() < 4) throw ValidationError("detect_plateau: need at least 4 points");
    const auto tail = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(opts.tail_fraction * static_cast<double>(series.size()))));
    const std::size_t first = series.size() - std::min(tail, series.size());
    Plateau p;
    p.level = median({series.begin() + static_cast<std::ptrdiff_t>(first), series.end()});
    if (!(p.level > 0.0)) return p;
    for (std::size_t i = first; i < series.size(); ++i)
        p.spread = std::max(p.spread, std::abs(series[i] - p.level) / p.level);
    p.found = p.spread <= opts.rel_tol;
    p.start = series.size();
    while (p.start > 0 && std::abs(series[p.start - 1] - p.level) <= opts.rel_tol * p.level) --p.start;
    return p;
}

std::size_t grid_stride(double coarse_dt, double fine_dt)
{
    if (!(coarse_dt > 0.0) || !(fine_dt > 0.0)) throw ValidationError("grid spacing must be > 0");
    const double ratio = coarse_dt / fine_dt;
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9 * ratio)
        throw ValidationError("incommensurate grids: ratio " + std::to_string(ratio) + " is not an integer");
    return static_cast<std::size_t>(r);
}

std::vector<double> kernel_errors(const KernelSeries& a, const KernelSeries& ref)
{
    if (!(a.dt > 0.0) || !(ref.dt > 0.0)) throw ValidationError("kernel_errors: grid spacing must be > 0");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        // Position of t_i on the reference grid, allowing for half offsets on either side.
        const double shift = ref.kind == KernelKind::ContinuousHalf ? 0.5 : 0.0;
        const double x = a.time(i) / ref.dt - shift;
        const double j = std::round(x);
        if (std::abs(x - j) > 1e-7 * std::max(1.0, x) || j < 0.0)
            throw ValidationError("kernel_errors: time " + std::to_string(a.time(i)) + " not on the reference grid");
        const auto idx = static_cast<std::size_t>(j);
        if (idx >= ref.size()) break;
        out.push_back(frob_norm(a.kernels[i] - ref.kernels[idx]));
    }
    return out;
}

namespace {

template <class F>
void for_aligned(std::size_t n_a, double dt_a, std::size_t n_ref, double dt_ref, F&& f)
{
    if (dt_a >= dt_ref) {
        const std::size_t stride = grid_stride(dt_a, dt_ref);
        for (std::size_t i = 0; i < n_a && i * stride < n_ref; ++i) f(i, i * stride);
    } else {
        const std::size_t stride = grid_stride(dt_ref, dt_a);
        for (std::size_t j = 0; j < n_ref && j * stride < n_a; ++j) f(j * stride, j);
    }
}

} // namespace

std::vector<double> state_errors(const StateSeries& a, double dt_a, const StateSeries& ref, double dt_ref)
{
    std::vector<double> out;
    for_aligned(a.size(), dt_a, ref.size(), dt_ref,
                [&](std::size_t i, std::size_t j) { out.push_back((a[i] - ref[j]).norm()); });
    return out;
}

double max_elementwise_error(const StateSeries& a, double dt_a, const StateSeries& ref, double dt_ref)
{
    double worst = 0.0;
    for_aligned(a.size(), dt_a, ref.size(), dt_ref, [&](std::size_t i, std::size_t j) {
        worst = std::max(worst, (a[i] - ref[j]).cwiseAbs().maxCoeff());
    });
    return worst;
}

double max_elementwise_error(const MapTrajectory& a, const MapTrajectory& ref)
{
    double worst = 0.0;
    for_aligned(a.size(), a.dt, ref.size(), ref.dt, [&](std::size_t i, std::size_t j) {
        worst = std::max(worst, (a.maps[i] - ref.maps[j]).cwiseAbs().maxCoeff());
    });
    return worst;
}

double time_average(std::span<const double> values)
{
    if (values.empty()) throw ValidationError("time_average of empty series");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

} // namespace gqme
