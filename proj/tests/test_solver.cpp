#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpdnls/solver.hpp"
#include "test_util.hpp"

using namespace qpdnls;
using qpdnls::test::Rng;

namespace {

SolverConfig desk_config(double eps, double delta, int m = 4, int cap = 8) {
  SolverConfig cfg;
  cfg.dims = Dims{1, 1};
  cfg.M = m;
  cfg.max_stage = 8;
  cfg.max_radius = cap;
  cfg.p = 1;
  cfg.eps = eps;
  cfg.delta = delta;
  cfg.amplitudes = {0.1};
  cfg.resonant = {Site{0}};
  return cfg;
}

DisorderRealization desk_pot(std::uint64_t seed, int radius = 64) {
  return DisorderRealization::sample({0, 1}, Box::cube(1, radius), seed);
}

}  // namespace

TEST_CASE("config validation") {
  SolverConfig cfg = desk_config(0, 0);
  CHECK_NOTHROW(cfg.validate());
  cfg.M = 2;  // M > 2p fails
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = desk_config(0, 0);
  cfg.amplitudes = {0.0};
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = desk_config(0, 0);
  cfg.amplitudes = {1.5};  // sum |a| < 1 fails
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = desk_config(0, 0);
  cfg.resonant = {Site{9}};  // 2p * |j| exceeds M
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
}

TEST_CASE("q_update: unperturbed frequencies are the resonant potentials") {
  const auto pot = desk_pot(5);
  const CoeffField y = CoeffField::initial(Dims{1, 1}, Box::cube(2, 4), 1, {0.1}, {Site{0}});
  const Frequencies w = q_update(y, 0, 0, pot);
  CHECK(w.omega[0] == pot.value(Site{0}));
}

TEST_CASE("q_update: single-site shift delta a^2 at p = 1") {
  const auto pot = desk_pot(7);
  const double a = 0.1, delta = 1e-2;
  const CoeffField y = CoeffField::initial(Dims{1, 1}, Box::cube(2, 4), 1, {a}, {Site{0}});
  const Frequencies w = q_update(y, 0, delta, pot);
  CHECK(w.omega[0] == doctest::Approx(pot.value(Site{0}) + delta * a * a).epsilon(1e-15));
}

TEST_CASE("q_update equals the redundant eval_F evaluation at omega = 0") {
  Rng rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const Dims dims{1, 1};
    CoeffField y = test::random_field(rng, dims, 3, 1, 0.15, 0.5, true);
    const auto pot = desk_pot(100 + trial, 8);
    const double eps = 0.02, delta = 0.3;
    const Frequencies got = q_update(y, eps, delta, pot);
    // independent path: F's first component at the pinned site with omega = 0
    const Residual r = eval_F(y, Frequencies{{0.0}}, eps, delta, pot);
    const double want = r.f1.at(y.pinned_site(0)) / y.amplitudes()[0];
    CHECK(got.omega[0] == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("newton step with zero residual leaves the field unchanged") {
  const auto pot = desk_pot(13);
  SolverConfig cfg = desk_config(0, 1e-2);
  SolverState st;
  st.stage = 0;
  st.y = CoeffField::initial(cfg.dims, Box::cube(2, cfg.stage_radius(0)), cfg.p,
                             cfg.amplitudes, cfg.resonant);
  const CoeffField before = st.y;
  CHECK(newton_step(st, pot, cfg) == StepStatus::Ok);
  CHECK(CoeffField::diff_norm(before, st.y) == 0.0);
}

TEST_CASE("unperturbed solve converges at stage 0 with zero residual") {
  const auto pot = desk_pot(17);
  const SolverConfig cfg = desk_config(0, 0);
  const SolveOutcome out = solve(cfg, pot);
  CHECK(out.status == SolveStatus::Converged);
  CHECK(out.stages_run == 0);
  CHECK(out.table.size() == 1);
  CHECK(out.table[0].kappa == 0.0);
  CHECK(out.omega.omega[0] == pot.value(Site{0}));
}

TEST_CASE("breather solve: exact seed solution and frequency shift") {
  const auto pot = desk_pot(19);
  const SolverConfig cfg = desk_config(0, 1e-2);
  const SolveOutcome out = solve(cfg, pot);
  REQUIRE(out.status == SolveStatus::Converged);
  CHECK(out.stages_run == 0);
  const double shift = out.omega.omega[0] - pot.value(Site{0});
  CHECK(std::abs(shift - 1e-2 * 0.1 * 0.1) <= 1e-12);
  // off-support entries identically zero
  const Box& b = out.y.box();
  for (std::int64_t i = 0; i < b.cardinality(); ++i) {
    const Site s = b.site_at(i);
    if (out.y.is_pinned_u(s)) continue;
    CHECK(std::abs(out.y.uhat().at(s)) <= 1e-14);
  }
}

TEST_CASE("desk solve: convergence, invariants, solution-quality checks") {
  const auto pot = desk_pot(42);
  SolverConfig cfg = desk_config(1e-3, 1e-3);
  const SolveOutcome out = solve(cfg, pot);
  REQUIRE(out.status == SolveStatus::Converged);
  CHECK(out.table.back().kappa <= cfg.residual_target);
  CHECK(out.checks.pinning_error == 0.0);
  CHECK(out.checks.conjugate_asymmetry <= 1e-12);
  CHECK(out.checks.support_radius <= cfg.max_radius);
  // monotone residual over the recorded stages
  for (std::size_t i = 1; i < out.table.size(); ++i)
    CHECK(out.table[i].kappa < out.table[i - 1].kappa);
  // super-linear contraction once kappa <= 1e-3
  for (std::size_t i = 1; i < out.table.size(); ++i) {
    const double prev = out.table[i - 1].kappa, cur = out.table[i].kappa;
    if (prev <= 1e-3 && prev > 0 && cur > 0) CHECK(cur <= std::pow(prev, 1.3));
  }
  // decay stability and frequency proximity
  CHECK(out.checks.alpha_final >= out.checks.alpha_first / 2);
  CHECK(out.checks.omega_err <= 10 * (cfg.eps + cfg.delta));
  CHECK(out.checks.weighted_ok());
}

TEST_CASE("newton iterates double correct digits on a fixed box") {
  // Strong coupling on a fixed box isolates the quadratic contraction of
  // the plain Newton map (no truncation term).
  const auto pot = desk_pot(29);
  SolverConfig cfg = desk_config(0.05, 0.3, 4, 4);
  cfg.amplitudes = {0.3};
  cfg.max_stage = 12;
  cfg.residual_target = 1e-13;
  const SolveOutcome out = solve(cfg, pot);
  REQUIRE(out.status == SolveStatus::Converged);
  int doubling = 0;
  for (std::size_t i = 1; i < out.table.size(); ++i) {
    const double prev = out.table[i - 1].kappa, cur = out.table[i].kappa;
    if (prev > 0 && cur > 0 && prev <= 1e-2 && cur <= prev * prev * 1e3) ++doubling;
  }
  CHECK(doubling >= 1);
}

TEST_CASE("pinning and symmetry preserved at every stage") {
  const auto pot = desk_pot(31);
  SolverConfig cfg = desk_config(1e-3, 1e-3);
  SolverState st;
  st.stage = 0;
  st.y = CoeffField::initial(cfg.dims, Box::cube(2, cfg.stage_radius(0)), cfg.p,
                             cfg.amplitudes, cfg.resonant);
  for (int stage = 0; stage < 4; ++stage) {
    st.stage = stage;
    REQUIRE(newton_step(st, pot, cfg) == StepStatus::Ok);
    CHECK(st.y.pinning_error() == 0.0);
    CHECK(st.y.conjugate_asymmetry() <= 1e-12);
    CHECK(st.y.support_radius() <= st.y.box().radius[0]);
  }
}

TEST_CASE("constructed resonance reports Resonant, not a crash") {
  auto pot = desk_pot(37);
  // Equal potentials at the resonant site and a neighbor make the
  // (j=1, n=-1) diagonal vanish identically; with eps tiny the smallest
  // singular value is ~eps^2 and the condition cap trips.
  pot.set_value(Site{1}, pot.value(Site{0}));
  SolverConfig cfg = desk_config(1e-8, 0);
  const SolveOutcome out = solve(cfg, pot);
  CHECK(out.status == SolveStatus::Resonant);
  CHECK(!out.message.empty());
}

TEST_CASE("blown-up steps near a resonance stagnate rather than loop") {
  auto pot = desk_pot(59);
  pot.set_value(Site{1}, pot.value(Site{0}));
  // with eps large enough the condition cap does not trip, the Newton step
  // explodes through the tiny pivot, and the residual stops improving
  SolverConfig cfg = desk_config(1e-3, 0);
  const SolveOutcome out = solve(cfg, pot);
  CHECK((out.status == SolveStatus::Stagnated || out.status == SolveStatus::Resonant));
  CHECK(out.status != SolveStatus::Converged);
}

TEST_CASE("stage budget exhaustion is reported") {
  const auto pot = desk_pot(61);
  SolverConfig cfg = desk_config(1e-3, 1e-3);
  cfg.max_stage = 1;
  cfg.residual_target = 1e-30;  // unreachable
  const SolveOutcome out = solve(cfg, pot);
  CHECK(out.status == SolveStatus::BudgetExceeded);
  CHECK(out.stages_run == 1);
  CHECK(out.table.size() == 2);  // initial and post-step evaluations
}

TEST_CASE("sweep at eps = delta = 0: identity graph, all converged") {
  const auto pot = desk_pot(41);
  const SolverConfig cfg = desk_config(0, 0);
  const SweepResult res = continuation_sweep(cfg, pot, {{0.1, 0.9, 9}});
  CHECK(res.num_converged == 9);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(res.rows[i].status == SolveStatus::Converged);
    CHECK(res.rows[i].omega.omega[0] == res.rows[i].v[0]);
  }
}

TEST_CASE("sweep at delta = 0 stays eps-close to the identity graph") {
  const auto pot = desk_pot(43);
  SolverConfig cfg = desk_config(1e-3, 0);
  const SweepResult res = continuation_sweep(cfg, pot, {{0.2, 0.8, 7}});
  for (const SweepRow& row : res.rows) {
    REQUIRE(row.status == SolveStatus::Converged);
    CHECK(std::abs(row.omega.omega[0] - row.v[0]) <= 10 * cfg.eps);
  }
}

TEST_CASE("sweep across a forced adjacent resonance hits a Resonant point") {
  auto pot = desk_pot(47);
  // Pin the neighbor's potential to an exact grid value of the sweep.
  const double lo = 0.3, hi = 0.5;
  const int count = 5;
  const double vstar = lo + (hi - lo) * 2.0 / (count - 1);  // third grid point
  pot.set_value(Site{1}, vstar);
  SolverConfig cfg = desk_config(1e-8, 0);
  const SweepResult res = continuation_sweep(cfg, pot, {{lo, hi, count}}, 1, false);
  CHECK(res.num_resonant >= 1);
}

TEST_CASE("threaded sweep matches sequential statuses") {
  const auto pot = desk_pot(53);
  SolverConfig cfg = desk_config(1e-3, 1e-3);
  cfg.max_radius = 4;
  const SweepResult a = continuation_sweep(cfg, pot, {{0.2, 0.8, 5}}, 1, false);
  const SweepResult b = continuation_sweep(cfg, pot, {{0.2, 0.8, 5}}, 2, false);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].status == b.rows[i].status);
    if (a.rows[i].status == SolveStatus::Converged)
      CHECK(a.rows[i].omega.omega[0] == b.rows[i].omega.omega[0]);
  }
}
