// Microbenchmarks of the kernels the solver leans on: assembly, the
// frequency-direction convolution, the inversion strategies and one full
// Newton stage.

#include <benchmark/benchmark.h>

#include "qpdnls/linop.hpp"
#include "qpdnls/solver.hpp"

using namespace qpdnls;

namespace {

struct Fixture {
  Dims dims{1, 1};
  DisorderRealization pot;
  CoeffField y;
  Frequencies omega{{0.5}};
  double eps = 1e-3, delta = 1e-3, theta = 0.05;

  explicit Fixture(int radius)
      : pot(DisorderRealization::sample({0.2, 0.3}, Box::cube(1, radius), 17)),
        y(CoeffField::initial(dims, Box::cube(2, radius), 1, {0.1}, {Site{0}})) {
    std::uint64_t s = 3;
    const Box& b = y.box();
    for (std::int64_t i = 0; i < b.cardinality(); ++i) {
      const Site site = b.site_at(i);
      s = splitmix64(s);
      y.uhat().ref(site) =
          0.05 * std::exp(-static_cast<double>(site.l1())) * (2 * key_to_unit(s) - 1);
    }
    for (std::int64_t i = 0; i < b.cardinality(); ++i) {
      const Site site = b.site_at(i);
      Site m = site;
      m[0] = -site[0];
      y.vhat().ref(site) = y.uhat().at(m);
    }
    y.pin();
  }
};

void bm_assemble(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  Fixture f(radius);
  const ElementaryRegion region = ElementaryRegion::cube(2, radius);
  for (auto _ : state) {
    auto op = assemble_T(f.y, f.omega, f.theta, f.eps, f.delta, f.pot, region);
    benchmark::DoNotOptimize(op.rows());
  }
}
BENCHMARK(bm_assemble)->Arg(4)->Arg(8)->Arg(12);

void bm_eval_f(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  Fixture f(radius);
  for (auto _ : state) {
    const Residual r = eval_F(f.y, f.omega, f.eps, f.delta, f.pot);
    benchmark::DoNotOptimize(r.norm_off_pinned(f.y));
  }
}
BENCHMARK(bm_eval_f)->Arg(8)->Arg(16);

void bm_convolve(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  Fixture f(radius);
  for (auto _ : state) {
    const FieldArray out = convolve_n(f.y.uhat(), f.y.vhat());
    benchmark::DoNotOptimize(out.max_abs());
  }
}
BENCHMARK(bm_convolve)->Arg(8)->Arg(16);

void bm_invert_dense(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  Fixture f(radius);
  const ElementaryRegion region = ElementaryRegion::cube(2, radius);
  const auto op = assemble_T(f.y, f.omega, f.theta, f.eps, f.delta, f.pot, region);
  for (auto _ : state) {
    auto out = invert_dense(op);
    benchmark::DoNotOptimize(out.report.norm_inv);
  }
}
BENCHMARK(bm_invert_dense)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void bm_covering_solve(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  Fixture f(radius);
  const ElementaryRegion region = ElementaryRegion::cube(2, radius);
  const ElementaryRegion inner = ElementaryRegion::cube(2, radius / 2);
  const auto op = assemble_T(f.y, f.omega, f.theta, f.eps, f.delta, f.pot, region);
  const auto cov = invert_covering(op, inner, default_covering_patches(region, inner, 2));
  if (cov.status != InvertStatus::Ok) {
    state.SkipWithError("covering unavailable");
    return;
  }
  Eigen::VectorXd fvec = Eigen::VectorXd::Ones(op.rows());
  for (auto _ : state) {
    const Eigen::VectorXd x = cov.inverse.solve(fvec);
    benchmark::DoNotOptimize(x.norm());
  }
}
BENCHMARK(bm_covering_solve)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void bm_newton_stage(benchmark::State& state) {
  SolverConfig cfg;
  cfg.dims = {1, 1};
  cfg.M = 4;
  cfg.max_radius = static_cast<int>(state.range(0));
  cfg.eps = 1e-3;
  cfg.delta = 1e-3;
  cfg.amplitudes = {0.1};
  cfg.resonant = {Site{0}};
  const auto pot = DisorderRealization::sample({0, 1}, Box::cube(1, 64), 42);
  for (auto _ : state) {
    SolverState st;
    st.stage = 1;
    st.y = CoeffField::initial(cfg.dims, Box::cube(2, cfg.stage_radius(1)), 1,
                               cfg.amplitudes, cfg.resonant);
    benchmark::DoNotOptimize(newton_step(st, pot, cfg));
  }
}
BENCHMARK(bm_newton_stage)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
