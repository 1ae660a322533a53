#include <benchmark/benchmark.h>

#include <numbers>
#include <string>
#include <vector>

#include "nrloop/expansion.hpp"
#include "nrloop/isolator.hpp"
#include "nrloop/network.hpp"
#include "random_networks.hpp"

using namespace nrloop;

namespace {

DeviceModel lab_device() {
    DeviceModel d;
    d.cavity_freq = {6.528e9, 6.733e9};
    d.kappa = {1.3e6, 2.0e6};
    d.eta = {0.99, 0.98};
    d.mech_freq = {6.7e6, 9.4e6};
    d.gamma = {15.0, 19.0};
    d.g0 = {{{50.0, 40.0}, {60.0, 20.0}}};
    return d;
}

ModeNetwork expanded() {
    const DeviceModel d = lab_device();
    return build_expanded_network(d, make_drives(d, {6e4, 4.5e4, 5.5e4, 4e4}, {2.3e3, -1e4, 2.3e3, -1e4}, 0.66));
}

ModeNetwork four_mode() {
    FourModeModel m;
    m.cooperativity = {5.4, 5.7, 2.9, 2.0};
    m.gamma = {1.6e3, 7.5e3};
    m.delta = {-1.1, 0.4};
    m.loop_phase = 0.66;
    return build_four_mode_network(m);
}

void BM_Scattering4(benchmark::State& state) {
    const ModeNetwork net = four_mode();
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(scattering(net, x));
        x += 1.0;
    }
}
BENCHMARK(BM_Scattering4);

void BM_Scattering10(benchmark::State& state) {
    const ModeNetwork net = expanded();
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(scattering(net, x));
        x += 1.0;
    }
}
BENCHMARK(BM_Scattering10);

void BM_Sweep10(benchmark::State& state) {
    const ModeNetwork net = expanded();
    std::vector<double> offsets, phases;
    for (int i = 0; i < 81; ++i) offsets.push_back(-2e4 + 500.0 * i);
    for (int i = 0; i < 37; ++i) phases.push_back((-180.0 + 10.0 * i) * std::numbers::pi / 180.0);
    SweepOptions opt;
    opt.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sweep_scattering(net, offsets, phases, {}, opt));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(offsets.size() * phases.size()));
}
BENCHMARK(BM_Sweep10)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Reduce10(benchmark::State& state) {
    const ModeNetwork net = expanded();
    const std::vector<std::string> keep{"a1", "a2", "b1", "b2"};
    for (auto _ : state) benchmark::DoNotOptimize(reduce_network(net, keep, 0.0));
}
BENCHMARK(BM_Reduce10);

void BM_EffectiveParameters(benchmark::State& state) {
    const ModeNetwork net = expanded();
    for (auto _ : state) benchmark::DoNotOptimize(effective_parameters(net));
}
BENCHMARK(BM_EffectiveParameters);

}  // namespace

BENCHMARK_MAIN();
