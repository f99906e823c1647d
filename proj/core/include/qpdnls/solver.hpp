#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qpdnls/linop.hpp"

namespace qpdnls {

struct SolverConfig {
  Dims dims;
  int M = 4;             // scale base; stage-i box radius is M^{i+1}
  int max_stage = 8;     // stage budget
  int max_radius = 0;    // box radius cap (0 = uncapped)
  int p = 1;
  double eps = 0;
  double delta = 0;
  std::vector<double> amplitudes;  // a_k, one per frequency axis
  std::vector<Site> resonant;      // spatial sites j_k
  double residual_target = 1e-11;
  double condition_cap = 1e14;
  int dense_cap = kDefaultDenseCapSites;
  int covering_c = 4;  // patch-size exponent: M0 = ceil((log N)^{C/2})

  void validate() const;
  int stage_radius(int stage) const;
  /// The resonant potential values of a realization (the sweep parameters).
  std::vector<double> resonant_values(const DisorderRealization& pot) const;
};

enum class SolveStatus { Converged, Resonant, Stagnated, BudgetExceeded };
const char* to_string(SolveStatus s);

struct StageRecord {
  int stage = 0;
  int n_radius = 0;
  double kappa = 0;       // residual of y_i before the step
  double delta_step = 0;  // |y_i - y_{i-1}|
  double alpha = kInfinity;
  double omega_err = 0;  // |omega_i - V|_inf
  double condition = 0;  // condition estimate of the stage operator
  std::string strategy;  // "dense" or "covering"; empty before a step
};

/// Quantitative checks of the constructed solution's defining bounds:
/// pinning, conjugate symmetry, decay stability, off-resonant weighted mass
/// and frequency proximity.
struct SolutionChecks {
  double pinning_error = 0;
  double conjugate_asymmetry = 0;
  int support_radius = 0;
  double alpha_first = kInfinity;
  double alpha_final = kInfinity;    // least-squares slope (decay stability)
  double alpha_uniform = kInfinity;  // uniform-envelope rate (weighted sum)
  double weighted_sum = 0;    // sum_{(j,n) not in S} e^{(alpha_uniform/2)(|n|+|j|)} |uhat|
  double weighted_bound = 0;  // sqrt(eps + delta)
  double omega_err = 0;       // |omega - V|_inf
  double omega_err_bound = 0; // 10 (eps + delta)
  bool weighted_ok() const {
    return weighted_sum < weighted_bound || (weighted_sum == 0 && weighted_bound == 0);
  }
  bool omega_ok() const {
    return omega_err <= omega_err_bound || (omega_err == 0 && omega_err_bound == 0);
  }
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::BudgetExceeded;
  CoeffField y;
  Frequencies omega;
  std::vector<StageRecord> table;
  SolutionChecks checks;
  int stages_run = 0;  // number of Newton steps actually taken
  std::string message;

  std::string stage_table_text() const;
};

/// Explicit frequency update from the resonant rows:
///   omega_k = ([(eps Lap + V) uhat](j_k, -e_k)
///             + delta [(uhat*vhat)^{*p} * uhat](j_k, -e_k)) / a_k.
/// Throws PreconditionError when some a_k is zero.
Frequencies q_update(const CoeffField& y, double eps, double delta,
                     const DisorderRealization& pot);

struct SolverState {
  int stage = 0;
  CoeffField y;
  Frequencies omega;
  double kappa = 0;
  double last_step_norm = 0;
  double last_condition = 0;
  std::string last_strategy;
};

enum class StepStatus { Ok, Resonant };

/// One modified-Newton stage on the current box: refresh omega, assemble
/// T at theta = 0 on the unpinned unknowns, solve for the update. The
/// pinned entries never move. Resonant (singular or condition cap hit) is
/// reported, not retried.
StepStatus newton_step(SolverState& state, const DisorderRealization& pot,
                       const SolverConfig& config, std::string* why = nullptr);

SolveOutcome solve(const SolverConfig& config, const DisorderRealization& pot);
/// Same, warm-started from a previous solution.
SolveOutcome solve_from(const SolverConfig& config, const DisorderRealization& pot,
                        const std::optional<CoeffField>& warm_start);

struct SweepAxis {
  double lo = 0, hi = 1;
  int count = 1;
};

struct SweepRow {
  std::vector<double> v;  // resonant potential values
  SolveStatus status = SolveStatus::BudgetExceeded;
  Frequencies omega;
  double kappa = 0;
  int stages = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int num_resonant = 0;
  int num_converged = 0;
};

/// Independent solves over a grid of resonant potential values; sequential
/// execution warm-starts each solve from its predecessor, threaded
/// execution keeps the solves independent.
SweepResult continuation_sweep(const SolverConfig& config, const DisorderRealization& pot,
                               const std::vector<SweepAxis>& grid, int threads = 1,
                               bool warm_start = true);

}  // namespace qpdnls
