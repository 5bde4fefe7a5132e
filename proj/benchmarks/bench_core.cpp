#include <benchmark/benchmark.h>

#include <random>

#include "crashre/diagnostics.hpp"
#include "crashre/negbin.hpp"
#include "crashre/sampler.hpp"
#include "crashre/simulate.hpp"

using namespace crashre;

static void BM_nb_log_pmf(benchmark::State& state) {
  std::int64_t y = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nb_log_pmf(y, {3.2, 0.2319}));
    y = (y + 1) & 63;
  }
}
BENCHMARK(BM_nb_log_pmf);

static void BM_nb_cdf(benchmark::State& state) {
  std::int64_t y = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nb_cdf(y, {18.0, 0.2319}));
    y = (y + 1) & 127;
  }
}
BENCHMARK(BM_nb_cdf);

// Full sweeps on the 177 x 4 rear-end design; one benchmark iteration is
// a 200-iteration single chain.
static void BM_sampler_sweeps(benchmark::State& state) {
  auto spec = GeneratorSpec::published(177, 1);
  spec.truths = {published_estimates(CrashType::kRearEnd)};
  const auto data = generate(spec);
  const auto dm =
      build_design(data.dataset, {CrashType::kRearEnd, spec.truths[0].design_covariates()});
  const SamplerModel model(dm, {}, true, true);
  SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.n_iterations = 200;
  cfg.n_burnin = 100;
  for (auto _ : state) benchmark::DoNotOptimize(run_chain(model, cfg, 1).trace.length());
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_sampler_sweeps)->Unit(benchmark::kMillisecond);

static void BM_ess(benchmark::State& state) {
  Rng rng(3);
  std::normal_distribution<double> z;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  double v = 0;
  for (auto& e : x) e = v = 0.9 * v + z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(effective_sample_size(x).ess);
}
BENCHMARK(BM_ess)->Arg(1000)->Arg(18000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
