#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "gqme/bath.hpp"
#include "gqme/discrete_gqme.hpp"
#include "gqme/heom.hpp"
#include "gqme/kernel_bridge.hpp"
#include "gqme/superop.hpp"
#include "gqme/volterra.hpp"

using namespace gqme;

namespace {

Superoperator damped_generator(const Operator& h)
{
    Operator jump = Operator::Zero();
    jump(0, 1) = 1.0;
    const Operator jj = jump.adjoint() * jump;
    return cplx(0.0, -1.0) * commutator_superop(h) +
           0.3 * (left_multiplication(jump) * right_multiplication(jump.adjoint()) -
                  0.5 * (left_multiplication(jj) + right_multiplication(jj)));
}

MapTrajectory damped_maps(double dt, std::size_t n)
{
    const Operator h = two_level_hamiltonian(0.0, -1.0);
    const Superoperator step = expm(damped_generator(h), dt);
    MapTrajectory traj{dt, {Superoperator::Identity()}};
    for (std::size_t k = 0; k < n; ++k) traj.maps.push_back(step * traj.maps.back());
    return traj;
}

} // namespace

static void BM_Expm(benchmark::State& state)
{
    const Superoperator a = damped_generator(two_level_hamiltonian(0.3, -1.0));
    for (auto _ : state) benchmark::DoNotOptimize(expm(a, 0.37));
}
BENCHMARK(BM_Expm);

static void BM_ExpmPade(benchmark::State& state)
{
    const Superoperator a = damped_generator(two_level_hamiltonian(0.3, -1.0)) * 3.1;
    for (auto _ : state) benchmark::DoNotOptimize(expm_pade(a));
}
BENCHMARK(BM_ExpmPade);

static void BM_ExtractDiscrete(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const MapTrajectory traj = damped_maps(0.01, n);
    const Operator h = two_level_hamiltonian(0.0, -1.0);
    for (auto _ : state) benchmark::DoNotOptimize(extract_discrete_kernels(traj, h));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExtractDiscrete)->RangeMultiplier(2)->Range(128, 2048)->Complexity(benchmark::oNSquared);

static void BM_PropagateTruncated(benchmark::State& state)
{
    const Operator h = two_level_hamiltonian(0.0, -1.0);
    const KernelSeries k = extract_discrete_kernels(damped_maps(0.01, 121), h);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(propagate_discrete(k, h, n, MemoryTruncation::at(1.2)));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PropagateTruncated)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oN);

static void BM_VolterraExtract(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const MapTrajectory traj = damped_maps(0.001, n);
    const Operator h = two_level_hamiltonian(0.0, -1.0);
    for (auto _ : state) benchmark::DoNotOptimize(extract_continuous_kernel(traj, h));
}
BENCHMARK(BM_VolterraExtract)->Arg(500)->Arg(2000);

static void BM_MpdiExtract(benchmark::State& state)
{
    const MapTrajectory traj = damped_maps(0.05, 200);
    const Operator h = two_level_hamiltonian(0.0, -1.0);
    for (auto _ : state) benchmark::DoNotOptimize(mpdi_extract(traj, h, MpdiNormalization::EndpointFullWeight));
}
BENCHMARK(BM_MpdiExtract);

static void BM_HeomPropagate(benchmark::State& state)
{
    ExpFit fit;
    fit.terms = {{cplx(1.2, -0.4), cplx(5.0, 0.0)}, {cplx(0.3, 0.1), cplx(1.0, 0.5)}, {cplx(-0.05, 0.0), cplx(1.3, 0.0)}};
    HeomConfig cfg;
    cfg.truncation = TotalDepth{static_cast<int>(state.range(0))};
    const SystemSpec sys{0.0, -1.0};
    state.counters["ados"] = static_cast<double>(heom_hierarchy_size(fit, cfg));
    for (auto _ : state) benchmark::DoNotOptimize(heom_propagate(sys, fit, cfg, 0.01, 20));
}
BENCHMARK(BM_HeomPropagate)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_BathCorrelation(benchmark::State& state)
{
    const SpectralDensity sd = benchmark_bath();
    double t = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bath_correlation(t, sd));
        t = std::fmod(t + 0.013, 10.0);
    }
}
BENCHMARK(BM_BathCorrelation);

BENCHMARK_MAIN();
