#include "qpdnls/solver.hpp"

#include <cmath>
#include <sstream>

namespace qpdnls {

void SolverConfig::validate() const {
  dims.validate();
  if (p < 1) throw PreconditionError("SolverConfig: p >= 1 required");
  if (amplitudes.size() != static_cast<std::size_t>(dims.nu) ||
      resonant.size() != static_cast<std::size_t>(dims.nu))
    throw PreconditionError("SolverConfig: need nu amplitudes and nu resonant sites");
  double suma = 0;
  for (double a : amplitudes) {
    if (a == 0) throw PreconditionError("SolverConfig: zero amplitude");
    suma += std::abs(a);
  }
  if (!(suma < 1)) throw PreconditionError("SolverConfig: sum |a_k| must be < 1");
  int maxcoord = 1;  // the resonant set reaches |n|_inf = 1
  for (const Site& j : resonant) {
    if (j.axes() != dims.d) throw PreconditionError("SolverConfig: resonant site axes != d");
    maxcoord = std::max(maxcoord, j.linf());
  }
  if (M <= 2 * p) throw PreconditionError("SolverConfig: M > 2p required");
  if (M < 2 * p * maxcoord)
    throw PreconditionError("SolverConfig: box [-M,M] must contain 2p * supp y0");
  if (max_stage < 1) throw PreconditionError("SolverConfig: max_stage >= 1");
  if (!(residual_target > 0)) throw PreconditionError("SolverConfig: residual_target > 0");
  if (!(eps >= 0) || !(delta >= 0)) throw PreconditionError("SolverConfig: eps, delta >= 0");
}

int SolverConfig::stage_radius(int stage) const {
  long r = 1;
  for (int i = 0; i <= stage; ++i) {
    r *= M;
    if (max_radius > 0 && r >= max_radius) return max_radius;
    if (r > (1 << 24)) return static_cast<int>(r);  // uncapped runaway guard
  }
  return static_cast<int>(r);
}

std::vector<double> SolverConfig::resonant_values(const DisorderRealization& pot) const {
  std::vector<double> v;
  v.reserve(resonant.size());
  for (const Site& j : resonant) v.push_back(pot.value(j));
  return v;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::Resonant: return "Resonant";
    case SolveStatus::Stagnated: return "Stagnated";
    case SolveStatus::BudgetExceeded: return "BudgetExceeded";
  }
  return "?";
}

Frequencies q_update(const CoeffField& y, double eps, double delta,
                     const DisorderRealization& pot) {
  const Dims& dims = y.dims();
  Frequencies w;
  w.omega.resize(static_cast<std::size_t>(dims.nu));
  for (int k = 0; k < dims.nu; ++k) {
    const double a = y.amplitudes()[static_cast<std::size_t>(k)];
    if (a == 0) throw PreconditionError("q_update: zero amplitude at mode " + std::to_string(k));
    const Site s = y.pinned_site(k);
    const Site j = s.spatial(dims);
    // omega_k = v_{j_k} + (eps * neighbor sum + delta * nonlinear term) / a_k,
    // algebraically equal to the resonant row divided by a_k but exact when
    // the correction vanishes.
    double correction = 0;
    if (eps != 0.0) {
      for (int ax = 0; ax < dims.d; ++ax) {
        for (int step : {-1, +1}) {
          Site nb = s;
          nb[dims.nu + ax] += step;
          correction += eps * y.uhat().at(nb);
        }
      }
    }
    if (delta != 0.0) {
      const NProfile up = y.uhat().profile(j);
      const NProfile vp = y.vhat().profile(j);
      const NProfile prof = NProfile::conv_pow(up.conv(vp), y.p()).conv(up);
      correction += delta * prof.at(s.freq(dims));
    }
    w.omega[static_cast<std::size_t>(k)] = pot.value(j) + correction / a;
  }
  return w;
}

namespace {

Eigen::VectorXd residual_on_dofs(const Residual& res, const LinearizedOp& op) {
  Eigen::VectorXd b(op.rows());
  for (int r = 0; r < op.rows(); ++r) {
    const Dof& d = op.dof(r);
    b[r] = (d.block == Block::U) ? res.f1.at(d.site) : res.f2.at(d.site);
  }
  return b;
}

void apply_update(CoeffField& y, const LinearizedOp& op, const Eigen::VectorXd& dy) {
  for (int r = 0; r < op.rows(); ++r) {
    const Dof& d = op.dof(r);
    if (d.block == Block::U)
      y.uhat().ref(d.site) -= dy[r];
    else
      y.vhat().ref(d.site) -= dy[r];
  }
  y.pin();
}

}  // namespace

StepStatus newton_step(SolverState& state, const DisorderRealization& pot,
                       const SolverConfig& config, std::string* why) {
  const int n = config.stage_radius(state.stage);
  const Box box = Box::cube(config.dims.total(), n);
  if (!(state.y.box() == box)) state.y = state.y.on_box(box);

  state.omega = q_update(state.y, config.eps, config.delta, pot);
  const Residual res = eval_F(state.y, state.omega, config.eps, config.delta, pot);
  state.kappa = res.norm_off_pinned(state.y);

  const ElementaryRegion region(box);
  const LinearizedOp op = assemble_T(state.y, state.omega, 0.0, config.eps, config.delta,
                                     pot, region, PinPolicy::PinnedEntries);
  const Eigen::VectorXd b = residual_on_dofs(res, op);

  if (region.cardinality() <= config.dense_cap) {
    DenseInvertOutcome inv = invert_dense(op, config.dense_cap);
    if (inv.status == InvertStatus::Singular) {
      if (why) {
        std::ostringstream ss;
        ss << "singular pivot " << inv.singular_pivot << " at index " << inv.singular_index;
        *why = ss.str();
      }
      state.last_strategy = "dense";
      return StepStatus::Resonant;
    }
    if (inv.report.condition > config.condition_cap) {
      if (why) {
        std::ostringstream ss;
        ss << "condition " << inv.report.condition << " exceeds cap " << config.condition_cap;
        *why = ss.str();
      }
      state.last_condition = inv.report.condition;
      state.last_strategy = "dense";
      return StepStatus::Resonant;
    }
    const Eigen::VectorXd dy = inv.inverse.solve(b);
    apply_update(state.y, op, dy);
    state.last_step_norm = dy.norm();
    state.last_condition = inv.report.condition;
    state.last_strategy = "dense";
  } else {
    // Above the dense cap: resolvent-identity covering with the previous
    // stage's box as the inner region.
    const int n_prev = config.stage_radius(state.stage - 1);
    const double logn = std::log(static_cast<double>(n));
    const int m0 = std::max(2, static_cast<int>(std::ceil(
                                   std::pow(logn, config.covering_c / 2.0))));
    const ElementaryRegion inner = ElementaryRegion::cube(config.dims.total(), n_prev);
    CoveringOutcome cov =
        invert_covering(op, inner, default_covering_patches(region, inner, m0));
    if (cov.status != InvertStatus::Ok) {
      if (why) *why = "covering inversion failed";
      state.last_strategy = "covering";
      return StepStatus::Resonant;
    }
    const Eigen::VectorXd dy = cov.inverse.solve(b);
    apply_update(state.y, op, dy);
    state.last_step_norm = dy.norm();
    state.last_condition = 0;
    state.last_strategy = "covering";
  }
  return StepStatus::Ok;
}

SolveOutcome solve(const SolverConfig& config, const DisorderRealization& pot) {
  return solve_from(config, pot, std::nullopt);
}

SolveOutcome solve_from(const SolverConfig& config, const DisorderRealization& pot,
                        const std::optional<CoeffField>& warm_start) {
  config.validate();
  const std::vector<double> vres = config.resonant_values(pot);

  SolveOutcome out;
  SolverState state;
  state.stage = 0;
  {
    const Box box0 = Box::cube(config.dims.total(), config.stage_radius(0));
    if (warm_start)
      state.y = warm_start->on_box(box0);
    else
      state.y = CoeffField::initial(config.dims, box0, config.p, config.amplitudes,
                                    config.resonant);
  }

  auto push_record = [&](double kappa, double step_norm) {
    StageRecord rec;
    rec.stage = state.stage;
    rec.n_radius = state.y.box().radius[0];
    rec.kappa = kappa;
    rec.delta_step = step_norm;
    rec.alpha = decay_fit(state.y).alpha;
    double werr = 0;
    for (int k = 0; k < config.dims.nu; ++k)
      werr = std::max(werr, std::abs(state.omega.omega[static_cast<std::size_t>(k)] -
                                     vres[static_cast<std::size_t>(k)]));
    rec.omega_err = werr;
    rec.condition = state.last_condition;
    rec.strategy = state.last_strategy;
    out.table.push_back(rec);
  };

  SolveStatus status = SolveStatus::BudgetExceeded;
  std::string why;
  for (int stage = 0;; ++stage) {
    state.stage = stage;
    const bool can_step = stage < config.max_stage;
    if (can_step) {
      const Box box = Box::cube(config.dims.total(), config.stage_radius(stage));
      if (!(state.y.box() == box)) state.y = state.y.on_box(box);
    }
    state.omega = q_update(state.y, config.eps, config.delta, pot);
    const Residual res = eval_F(state.y, state.omega, config.eps, config.delta, pot);
    state.kappa = res.norm_off_pinned(state.y);
    push_record(state.kappa, state.last_step_norm);

    if (state.kappa <= config.residual_target) {
      status = SolveStatus::Converged;
      break;
    }
    // Stagnation: less than 10% decay over two stages.
    const std::size_t m = out.table.size();
    if (m >= 3) {
      const double prev2 = out.table[m - 3].kappa;
      if (prev2 > 0 && state.kappa > 0.9 * prev2) {
        status = SolveStatus::Stagnated;
        why = "residual decreased by < 10% over two stages";
        break;
      }
    }
    if (!can_step) break;  // stage budget exhausted
    const StepStatus st = newton_step(state, pot, config, &why);
    out.stages_run += 1;
    if (st == StepStatus::Resonant) {
      status = SolveStatus::Resonant;
      break;
    }
  }

  out.status = status;
  out.y = state.y;
  out.omega = state.omega;
  out.message = why;

  SolutionChecks& c = out.checks;
  c.pinning_error = out.y.pinning_error();
  c.conjugate_asymmetry = out.y.conjugate_asymmetry();
  c.support_radius = out.y.support_radius();
  for (const StageRecord& r : out.table)
    if (std::isfinite(r.alpha) && !std::isfinite(c.alpha_first)) c.alpha_first = r.alpha;
  c.alpha_final = out.table.empty() ? kInfinity : out.table.back().alpha;
  c.alpha_uniform = uniform_decay_rate(out.y);
  c.weighted_bound = std::sqrt(config.eps + config.delta);
  c.weighted_sum = std::isfinite(c.alpha_uniform)
                       ? out.y.weighted_offres_sum(c.alpha_uniform / 2.0)
                       : out.y.weighted_offres_sum(0.0);
  c.omega_err_bound = 10.0 * (config.eps + config.delta);
  for (int k = 0; k < config.dims.nu; ++k)
    c.omega_err = std::max(c.omega_err, std::abs(out.omega.omega[static_cast<std::size_t>(k)] -
                                                 vres[static_cast<std::size_t>(k)]));
  return out;
}

std::string SolveOutcome::stage_table_text() const {
  std::ostringstream ss;
  ss << "# stage N kappa delta alpha omega_err condition strategy\n";
  for (const StageRecord& r : table) {
    ss << r.stage << " " << r.n_radius << " " << format_full(r.kappa) << " "
       << format_full(r.delta_step) << " " << format_full(r.alpha) << " "
       << format_full(r.omega_err) << " " << format_full(r.condition) << " "
       << (r.strategy.empty() ? "-" : r.strategy) << "\n";
  }
  return ss.str();
}

SweepResult continuation_sweep(const SolverConfig& config, const DisorderRealization& pot,
                               const std::vector<SweepAxis>& grid, int threads,
                               bool warm_start) {
  config.validate();
  if (grid.size() != static_cast<std::size_t>(config.dims.nu))
    throw PreconditionError("continuation_sweep: need one grid axis per frequency axis");
  std::size_t total = 1;
  for (const SweepAxis& a : grid) {
    if (a.count < 1) throw PreconditionError("continuation_sweep: axis count >= 1");
    total *= static_cast<std::size_t>(a.count);
  }

  auto point_values = [&](std::size_t flat) {
    std::vector<double> v(grid.size());
    for (std::size_t ax = grid.size(); ax-- > 0;) {
      const SweepAxis& a = grid[ax];
      const std::size_t i = flat % static_cast<std::size_t>(a.count);
      flat /= static_cast<std::size_t>(a.count);
      v[ax] = a.count == 1 ? a.lo
                           : a.lo + (a.hi - a.lo) * static_cast<double>(i) /
                                 static_cast<double>(a.count - 1);
    }
    return v;
  };

  SweepResult result;
  result.rows.resize(total);

  auto run_point = [&](std::size_t i, const std::optional<CoeffField>& warm) {
    const std::vector<double> v = point_values(i);
    const DisorderRealization local =
        pot.with_overrides(config.resonant, std::span<const double>(v));
    const SolveOutcome sol = solve_from(config, local, warm);
    SweepRow row;
    row.v = v;
    row.status = sol.status;
    row.omega = sol.omega;
    row.kappa = sol.table.empty() ? 0 : sol.table.back().kappa;
    row.stages = sol.stages_run;
    result.rows[i] = std::move(row);
    return sol;
  };

  if (threads <= 1) {
    std::optional<CoeffField> warm;
    for (std::size_t i = 0; i < total; ++i) {
      const SolveOutcome sol = run_point(i, warm);
      if (warm_start && sol.status == SolveStatus::Converged)
        warm = sol.y;
      else
        warm.reset();
    }
  } else {
    parallel_for(total, threads, [&](std::size_t i) { run_point(i, std::nullopt); });
  }

  for (const SweepRow& r : result.rows) {
    if (r.status == SolveStatus::Converged) result.num_converged += 1;
    if (r.status == SolveStatus::Resonant) result.num_resonant += 1;
  }
  return result;
}

}  // namespace qpdnls
