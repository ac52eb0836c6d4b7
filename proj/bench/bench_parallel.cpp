#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "skewinfo/fisher.hpp"
#include "skewinfo/quad.hpp"

using namespace skewinfo;

namespace {

quad::Integrand gaussian_moments(int dim) {
  quad::Integrand f;
  f.dim = dim;
  f.components = 3;
  f.eval = [dim](std::span<const double> z, std::span<double> out) {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    const double w = std::exp(-0.5 * r2) / std::pow(2.0 * M_PI, 0.5 * dim);
    out[0] = w;
    out[1] = r2 * w;
    out[2] = r2 * r2 * w;
  };
  return f;
}

template <bool Parallel>
void tensor(benchmark::State& state) {
  const auto f = gaussian_moments(static_cast<int>(state.range(0)));
  const quad::Scheme s = quad::TensorProduct{static_cast<int>(state.range(1))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? quad::integrate(f, s) : quad::integrate_serial(f, s));
  }
}

template <bool Parallel>
void monte_carlo(benchmark::State& state) {
  auto f = gaussian_moments(3);
  f.envelope = quad::Envelope{
      [](CounterRng& rng, std::span<double> out) {
        for (double& v : out) v = rng.normal();
      },
      [](std::span<const double> z) {
        double r2 = 0.0;
        for (double v : z) r2 += v * v;
        return -0.5 * r2 - 1.5 * std::log(2.0 * M_PI);
      }};
  const quad::Scheme s = quad::MonteCarlo{static_cast<std::size_t>(state.range(0)), 5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? quad::integrate(f, s) : quad::integrate_serial(f, s));
  }
}

SkewModel skew_t2() {
  ThetaPoint t = ThetaPoint::standard(2);
  return SkewModel(kernels::student(5.0, 2), SkewingFunction::t_type(2, 5.0), t);
}

template <bool Parallel>
void sampling(benchmark::State& state) {
  const SkewModel m = skew_t2();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? m.sample(n, 9) : m.sample_serial(n, 9));
  }
}

template <bool Parallel>
void empirical(benchmark::State& state) {
  const SkewModel m = skew_t2();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? empirical_information(m, InfoKind::full, n, 3)
                                      : empirical_information_serial(m, InfoKind::full, n, 3));
  }
}

}  // namespace

BENCHMARK(tensor<true>)->Name("tensor/parallel")->Args({2, 6})->Args({3, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(tensor<false>)->Name("tensor/serial")->Args({2, 6})->Args({3, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(monte_carlo<true>)->Name("monte_carlo/parallel")->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(monte_carlo<false>)->Name("monte_carlo/serial")->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(sampling<true>)->Name("sample/parallel")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(sampling<false>)->Name("sample/serial")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(empirical<true>)->Name("empirical_info/parallel")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(empirical<false>)->Name("empirical_info/serial")->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
