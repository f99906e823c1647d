// Command-line workbench: configuration-driven runs of the solver, the
// spectral and measure diagnostics, the time-domain integrator and the
// inversion-strategy benchmark. See README.md for the config format.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "qpdnls/config.hpp"
#include "qpdnls/evolve.hpp"
#include "qpdnls/measure.hpp"
#include "qpdnls/solver.hpp"
#include "qpdnls/spectral.hpp"

namespace qpdnls::cli {

namespace fs = std::filesystem;

struct Args {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "error: " << msg << "\n"
            << "usage: qpdnls <solve|sweep|spectral|wegner|theta-scan|dioph|evolve|compare|bench>"
               " --config PATH [--seed INT] [--out DIR] [--threads INT]\n";
  std::exit(2);
}

Args parse_args(int argc, char** argv) {
  Args args;
  if (argc < 2) usage_error("missing command");
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    const std::string flag = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) usage_error("flag " + flag + " needs a value");
      return argv[++i];
    };
    if (flag == "--config")
      args.config_path = value();
    else if (flag == "--seed")
      args.seed = std::stoull(value());
    else if (flag == "--out")
      args.out = value();
    else if (flag == "--threads")
      args.threads = std::stoi(value());
    else
      usage_error("unknown flag " + flag);
  }
  if (args.config_path.empty()) usage_error("--config is required");
  return args;
}

class Timer {
public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

struct Ctx {
  Config cfg;
  std::string out_dir;
  std::uint64_t seed = 1;
  int threads = 1;

  std::string path(const std::string& name) const { return out_dir + "/" + name; }
};

Dims read_dims(const Config& cfg) {
  Dims dims;
  dims.d = static_cast<int>(cfg.get_int("problem", "d", 1));
  dims.nu = static_cast<int>(cfg.get_int("problem", "nu", 1));
  dims.validate();
  return dims;
}

std::vector<Site> read_resonant(const Config& cfg, const Dims& dims) {
  std::vector<Site> out;
  for (int k = 1; k <= dims.nu; ++k) {
    std::vector<int> coords = cfg.get_ints("problem", "resonant_" + std::to_string(k),
                                           std::vector<int>(static_cast<std::size_t>(dims.d), 0));
    if (static_cast<int>(coords.size()) != dims.d)
      throw ConfigError("config key [problem] resonant_" + std::to_string(k) +
                        ": expected " + std::to_string(dims.d) + " coordinates");
    out.push_back(Site(std::span<const int>(coords)));
  }
  return out;
}

DisorderRealization read_disorder(const Ctx& ctx, const Dims& dims, int min_radius) {
  Distribution dist;
  dist.lo = ctx.cfg.get_double("disorder", "lo", 0.0);
  dist.hi = ctx.cfg.get_double("disorder", "hi", 1.0);
  dist.validate();
  const int radius =
      static_cast<int>(ctx.cfg.get_int("disorder", "radius", std::max(min_radius, 64)));
  if (radius < min_radius)
    throw ConfigError("config key [disorder] radius: must be at least " +
                      std::to_string(min_radius) + " for this run");
  auto pot = DisorderRealization::sample(dist, Box::cube(dims.d, radius),
                                         substream_seed(ctx.seed, "disorder"));
  // optional per-site overrides: override_k = j-coords... value
  for (int k = 1; ctx.cfg.has("disorder", "override_" + std::to_string(k)); ++k) {
    const auto vals =
        ctx.cfg.get_doubles("disorder", "override_" + std::to_string(k));
    if (static_cast<int>(vals.size()) != dims.d + 1)
      throw ConfigError("config key [disorder] override_" + std::to_string(k) +
                        ": expected d coordinates and a value");
    std::vector<int> coords;
    for (int i = 0; i < dims.d; ++i) coords.push_back(static_cast<int>(vals[static_cast<std::size_t>(i)]));
    pot.set_value(Site(std::span<const int>(coords)), vals.back());
  }
  return pot;
}

SolverConfig read_solver_config(const Ctx& ctx, const Dims& dims) {
  SolverConfig s;
  s.dims = dims;
  s.p = static_cast<int>(ctx.cfg.get_int("problem", "p", 1));
  s.eps = ctx.cfg.get_double("problem", "eps", 0.0);
  s.delta = ctx.cfg.get_double("problem", "delta", 0.0);
  s.amplitudes = ctx.cfg.get_doubles("problem", "amplitudes",
                                     std::vector<double>(static_cast<std::size_t>(dims.nu), 0.1));
  s.resonant = read_resonant(ctx.cfg, dims);
  s.M = static_cast<int>(ctx.cfg.get_int("solve", "M", 4));
  s.max_stage = static_cast<int>(ctx.cfg.get_int("solve", "max_stage", 8));
  s.max_radius = static_cast<int>(ctx.cfg.get_int("solve", "max_radius", 16));
  s.residual_target = ctx.cfg.get_double("solve", "residual_target", 1e-11);
  s.condition_cap = ctx.cfg.get_double("solve", "condition_cap", 1e14);
  s.dense_cap = static_cast<int>(ctx.cfg.get_int("solve", "dense_cap", kDefaultDenseCapSites));
  s.validate();
  return s;
}

void write_solution_summary(const Ctx& ctx, RunManifest& manifest, const SolveOutcome& out,
                            const SolverConfig& scfg, const DisorderRealization& pot) {
  {
    std::ostringstream ss;
    ss << "# solve summary\n";
    ss << "status = " << to_string(out.status) << "\n";
    ss << "stages_run = " << out.stages_run << "\n";
    if (!out.message.empty()) ss << "message = " << out.message << "\n";
    ss << "kappa = " << format_full(out.table.empty() ? 0.0 : out.table.back().kappa) << "\n";
    for (int k = 0; k < scfg.dims.nu; ++k)
      ss << "omega_" << (k + 1) << " = " << format_full(out.omega.omega[static_cast<std::size_t>(k)])
         << "\n";
    const auto vres = scfg.resonant_values(pot);
    for (int k = 0; k < scfg.dims.nu; ++k)
      ss << "v_" << (k + 1) << " = " << format_full(vres[static_cast<std::size_t>(k)]) << "\n";
    ss << "pinning_error = " << format_full(out.checks.pinning_error) << "\n";
    ss << "conjugate_asymmetry = " << format_full(out.checks.conjugate_asymmetry) << "\n";
    ss << "alpha_first = " << format_full(out.checks.alpha_first) << "\n";
    ss << "alpha_final = " << format_full(out.checks.alpha_final) << "\n";
    ss << "alpha_uniform = " << format_full(out.checks.alpha_uniform) << "\n";
    ss << "weighted_sum = " << format_full(out.checks.weighted_sum) << "\n";
    ss << "weighted_bound = " << format_full(out.checks.weighted_bound) << "\n";
    ss << "omega_err = " << format_full(out.checks.omega_err) << "\n";
    atomic_write_file(ctx.path("solution.txt"), ss.str());
    manifest.add_output(ctx.path("solution.txt"));
  }
  atomic_write_file(ctx.path("stages.txt"), out.stage_table_text());
  manifest.add_output(ctx.path("stages.txt"));
  out.y.save(ctx.path("field.txt"));
  manifest.add_output(ctx.path("field.txt"));
}

int cmd_solve(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const SolverConfig scfg = read_solver_config(ctx, dims);
  const int need = scfg.stage_radius(scfg.max_stage - 1) + 1;
  const DisorderRealization pot = read_disorder(ctx, dims, std::min(need, 512));
  Timer t;
  const SolveOutcome out = solve(scfg, pot);
  manifest.add_timing("solve", t.seconds());
  write_solution_summary(ctx, manifest, out, scfg, pot);
  if (out.status != SolveStatus::Converged) {
    manifest.set_status(std::string("error: ") + to_string(out.status) +
                        (out.message.empty() ? "" : ": " + out.message));
    return 3;
  }
  return 0;
}

int cmd_sweep(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const SolverConfig scfg = read_solver_config(ctx, dims);
  const DisorderRealization pot = read_disorder(ctx, dims, 64);
  std::vector<SweepAxis> grid;
  for (int k = 1; k <= dims.nu; ++k) {
    SweepAxis ax;
    ax.lo = ctx.cfg.get_double("sweep", "lo_" + std::to_string(k), 0.1);
    ax.hi = ctx.cfg.get_double("sweep", "hi_" + std::to_string(k), 0.9);
    ax.count = static_cast<int>(ctx.cfg.get_int("sweep", "count_" + std::to_string(k), 9));
    grid.push_back(ax);
  }
  const bool warm = ctx.cfg.get_bool("sweep", "warm_start", true);
  Timer t;
  const SweepResult res = continuation_sweep(scfg, pot, grid, ctx.threads, warm);
  manifest.add_timing("sweep", t.seconds());

  std::vector<std::string> cols;
  for (int k = 1; k <= dims.nu; ++k) cols.push_back("v_" + std::to_string(k));
  cols.push_back("status");
  for (int k = 1; k <= dims.nu; ++k) cols.push_back("omega_" + std::to_string(k));
  cols.push_back("kappa");
  cols.push_back("stages");
  TableWriter table(cols);
  table.meta("command", "sweep");
  table.meta("converged", static_cast<double>(res.num_converged));
  table.meta("resonant", static_cast<double>(res.num_resonant));
  for (const SweepRow& row : res.rows) {
    std::vector<std::string> cells;
    for (double v : row.v) cells.push_back(format_full(v));
    cells.push_back(to_string(row.status));
    for (int k = 0; k < dims.nu; ++k)
      cells.push_back(row.omega.omega.empty()
                          ? "nan"
                          : format_full(row.omega.omega[static_cast<std::size_t>(k)]));
    cells.push_back(format_full(row.kappa));
    cells.push_back(std::to_string(row.stages));
    table.row_mixed(cells);
  }
  atomic_write_file(ctx.path("sweep.csv"), table.render());
  manifest.add_output(ctx.path("sweep.csv"));
  return 0;
}

int cmd_spectral(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const double eps = ctx.cfg.get_double("problem", "eps", 1e-3);
  const int radius = static_cast<int>(ctx.cfg.get_int("spectral", "radius", 10));
  const DisorderRealization pot = read_disorder(ctx, dims, radius);
  const ElementaryRegion region = ElementaryRegion::cube(dims.d, radius);

  Timer t;
  const EigenData ed = eig_region(eps, pot, region);
  manifest.add_timing("eig_region", t.seconds());
  {
    TableWriter table({"index", "mu", "center", "decay_rate"});
    table.meta("command", "spectral");
    table.meta("eps", eps);
    table.meta("radius", static_cast<double>(radius));
    const auto rates = eigenvector_decay_rates(ed);
    for (int i = 0; i < ed.mu.size(); ++i) {
      std::vector<std::string> cells = {std::to_string(i), format_full(ed.mu[i]),
                                        ed.centers[static_cast<std::size_t>(i)].str(),
                                        format_full(rates[static_cast<std::size_t>(i)])};
      table.row_mixed(cells);
    }
    atomic_write_file(ctx.path("eigs.csv"), table.render());
    manifest.add_output(ctx.path("eigs.csv"));
  }
  {
    // regularity over an energy grid inflated 5% beyond the spectrum bounds
    const double m_rate =
        ctx.cfg.get_double("spectral", "rate", 0.5 * std::log(1.0 / std::max(eps, 1e-12)));
    const int n_energy = static_cast<int>(ctx.cfg.get_int("spectral", "energies", 21));
    const auto [lo, hi] = spectrum_bounds(eps, pot.dist(), dims.d);
    const double pad = 0.05 * (hi - lo);
    TableWriter table({"E", "regular", "worst_g", "worst_bound"});
    table.meta("m", m_rate);
    Timer t2;
    for (int i = 0; i < n_energy; ++i) {
      const double e_energy =
          lo - pad + (hi - lo + 2 * pad) * static_cast<double>(i) / (n_energy - 1);
      std::vector<std::string> cells = {format_full(e_energy)};
      try {
        const RegularityReport rep = check_regular(eps, pot, region, e_energy, m_rate);
        cells.push_back(rep.regular ? "1" : "0");
        cells.push_back(format_full(rep.worst_g));
        cells.push_back(format_full(rep.worst_bound));
      } catch (const NotResolventError&) {
        cells.push_back("resolvent");
        cells.push_back("nan");
        cells.push_back("nan");
      }
      table.row_mixed(cells);
    }
    manifest.add_timing("regularity_grid", t2.seconds());
    atomic_write_file(ctx.path("regularity.csv"), table.render());
    manifest.add_output(ctx.path("regularity.csv"));
  }
  {
    const double chi_rate = ctx.cfg.get_double("spectral", "chi_rate", 1.0);
    const int n_radius = static_cast<int>(ctx.cfg.get_int("spectral", "n_radius", 4));
    std::vector<int> radii(static_cast<std::size_t>(dims.total()), 0);
    for (int i = 0; i < dims.nu; ++i) radii[static_cast<std::size_t>(i)] = n_radius;
    for (int i = 0; i < dims.d; ++i)
      radii[static_cast<std::size_t>(dims.nu + i)] = radius;
    Frequencies omega;
    omega.omega = ctx.cfg.get_doubles("spectral", "omega",
                                      std::vector<double>(static_cast<std::size_t>(dims.nu), 0.5));
    Timer t3;
    const SeparationDiagnostic diag =
        separation_1_17(eps, pot, omega, ElementaryRegion(Box::around(Site::zero(dims.total()), radii)),
                        chi_rate, dims);
    manifest.add_timing("separation_diagnostic", t3.seconds());
    TableWriter table({"dist", "count", "median_ratio", "min_ratio"});
    table.meta("chi_rate", chi_rate);
    table.meta("cutoff_dist", static_cast<double>(diag.cutoff_dist));
    for (const SeparationBand& band : diag.bands)
      table.row({static_cast<double>(band.dist), static_cast<double>(band.count),
                 band.median_ratio, band.min_ratio});
    atomic_write_file(ctx.path("separation.csv"), table.render());
    manifest.add_output(ctx.path("separation.csv"));
  }
  return 0;
}

int cmd_wegner(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const double eps = ctx.cfg.get_double("problem", "eps", 0.0);
  Distribution dist;
  dist.lo = ctx.cfg.get_double("disorder", "lo", 0.0);
  dist.hi = ctx.cfg.get_double("disorder", "hi", 1.0);
  const double e_energy = ctx.cfg.get_double("wegner", "energy", 0.5);
  const std::vector<double> kappas = ctx.cfg.get_doubles(
      "wegner", "kappas", std::vector<double>{5e-4, 1e-3, 2e-3, 4e-3});
  const int trials = static_cast<int>(ctx.cfg.get_int("wegner", "trials", 1000));
  const std::vector<int> sizes =
      ctx.cfg.get_ints("wegner", "sites", std::vector<int>{5, 10, 20});

  TableWriter table({"sites", "kappa", "prob", "slope", "slope_reference"});
  table.meta("command", "wegner");
  table.meta("trials", static_cast<double>(trials));
  table.meta("energy", e_energy);
  Timer t;
  for (int sz : sizes) {
    if (dims.d != 1 || sz < 1)
      throw ConfigError("config key [wegner] sites: 1-d site counts >= 1 required");
    // |S|-site segment as a cut hyper-rectangle
    const ElementaryRegion s_region(Box::cube(1, sz - 1), Site{sz});
    const WegnerTable wt = wegner_stat(eps, dist, s_region, e_energy, kappas, trials,
                                       substream_seed(ctx.seed, "wegner"), ctx.threads);
    for (std::size_t k = 0; k < kappas.size(); ++k)
      table.row({static_cast<double>(sz), wt.kappa[k], wt.prob[k], wt.slope,
                 wt.slope_reference});
  }
  manifest.add_timing("wegner", t.seconds());
  atomic_write_file(ctx.path("wegner.csv"), table.render());
  manifest.add_output(ctx.path("wegner.csv"));
  return 0;
}

int cmd_theta_scan(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const double eps = ctx.cfg.get_double("problem", "eps", 0.0);
  const double delta = ctx.cfg.get_double("problem", "delta", 0.0);
  const int p = static_cast<int>(ctx.cfg.get_int("problem", "p", 1));
  ThetaScanConfig tcfg;
  tcfg.n_scale = static_cast<int>(ctx.cfg.get_int("theta-scan", "N", 4));
  tcfg.beta = ctx.cfg.get_double("theta-scan", "beta", 0.75);
  tcfg.gamma = ctx.cfg.get_double("theta-scan", "gamma", 0.0);
  tcfg.decay_sample_columns =
      static_cast<int>(ctx.cfg.get_int("theta-scan", "decay_columns", 0));
  tcfg.threads = ctx.threads;

  const DisorderRealization pot = read_disorder(ctx, dims, tcfg.n_scale);
  const std::vector<Site> resonant = read_resonant(ctx.cfg, dims);
  const std::vector<double> amps = ctx.cfg.get_doubles(
      "problem", "amplitudes", std::vector<double>(static_cast<std::size_t>(dims.nu), 0.1));
  Frequencies omega;
  omega.omega.clear();
  if (ctx.cfg.has("theta-scan", "omega")) {
    omega.omega = ctx.cfg.get_doubles("theta-scan", "omega");
  } else {
    for (const Site& j : resonant) omega.omega.push_back(pot.value(j));
  }

  const double half = default_theta_halfwidth(tcfg.n_scale, omega, eps, pot.dist(), dims);
  tcfg.grid.lo = ctx.cfg.get_double("theta-scan", "lo", -half);
  tcfg.grid.hi = ctx.cfg.get_double("theta-scan", "hi", half);
  tcfg.grid.step = ctx.cfg.get_double("theta-scan", "step", 1e-4);

  const CoeffField y = CoeffField::initial(dims, Box::cube(dims.total(), tcfg.n_scale), p,
                                           amps, resonant);
  Timer t;
  const ThetaScan scan = theta_scan(y, omega, eps, delta, pot, tcfg);
  manifest.add_timing("theta_scan", t.seconds());

  TableWriter table({"theta", "norm_inv", "rate", "bad"});
  table.meta("command", "theta-scan");
  table.meta("N", static_cast<double>(tcfg.n_scale));
  table.meta("beta", tcfg.beta);
  table.meta("gamma", tcfg.gamma);
  table.meta("measure_estimate", scan.measure_estimate);
  for (std::size_t i = 0; i < scan.theta.size(); ++i)
    table.row({scan.theta[i], scan.norm_inv[i], scan.rate[i],
               static_cast<double>(scan.bad[i])});
  atomic_write_file(ctx.path("scan.csv"), table.render());
  manifest.add_output(ctx.path("scan.csv"));

  // companion exact stage-0 exclusion set for this instance
  const auto ex = step0_exclusion(tcfg.n_scale, tcfg.beta, eps, delta, omega, pot,
                                  resonant, dims);
  TableWriter extab({"lo", "hi"});
  extab.meta("total_length", ex.total_length());
  extab.meta("bound", step0_bound(tcfg.n_scale, tcfg.beta, eps, delta, dims));
  for (const auto& [lo, hi] : ex.intervals()) extab.row({lo, hi});
  atomic_write_file(ctx.path("exclusion.csv"), extab.render());
  manifest.add_output(ctx.path("exclusion.csv"));
  return 0;
}

int cmd_dioph(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  DiophantineParams params;
  params.a_exp = ctx.cfg.get_double("dioph", "A", 2.0);
  params.c = ctx.cfg.get_double("dioph", "c", 0.1);
  params.n_range = static_cast<int>(ctx.cfg.get_int("dioph", "N", 100));
  Frequencies omega;
  omega.omega = ctx.cfg.get_doubles("dioph", "omega");
  if (static_cast<int>(omega.omega.size()) != dims.nu)
    throw ConfigError("config key [dioph] omega: expected nu entries");
  Timer t;
  const DiophantineReport rep = check_diophantine(omega, params);
  manifest.add_timing("dioph", t.seconds());
  std::ostringstream ss;
  ss << "# diophantine certification\n";
  ss << "ok = " << (rep.ok ? "true" : "false") << "\n";
  ss << "worst_n = " << rep.worst_n.str() << "\n";
  ss << "worst_norm = " << format_full(rep.worst_norm) << "\n";
  ss << "worst_bound = " << format_full(rep.worst_bound) << "\n";
  atomic_write_file(ctx.path("dioph.txt"), ss.str());
  manifest.add_output(ctx.path("dioph.txt"));
  return 0;
}

Eigen::VectorXcd read_initial_state(const Ctx& ctx, const Dims& dims, const RegionIndex& idx) {
  const std::string init = ctx.cfg.get_str("evolve", "init", "delta");
  std::istringstream ss(init);
  std::string kind;
  ss >> kind;
  Eigen::VectorXcd u0 = Eigen::VectorXcd::Zero(idx.size());
  if (kind == "delta") {
    std::vector<int> coords(static_cast<std::size_t>(dims.d), 0);
    double amp = 0.1;
    for (int& c : coords)
      if (!(ss >> c)) throw ConfigError("config key [evolve] init: delta needs d coords");
    if (!(ss >> amp)) throw ConfigError("config key [evolve] init: delta needs an amplitude");
    const int at = idx.find(Site(std::span<const int>(coords)));
    if (at < 0) throw ConfigError("config key [evolve] init: site outside the box");
    u0[at] = amp;
    return u0;
  }
  throw ConfigError("config key [evolve] init: unknown kind " + kind);
}

int cmd_evolve(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  EvolutionConfig cfg;
  const int radius = static_cast<int>(ctx.cfg.get_int("evolve", "radius", 10));
  cfg.box = ElementaryRegion::cube(dims.d, radius);
  cfg.eps = ctx.cfg.get_double("problem", "eps", 0.0);
  cfg.delta = ctx.cfg.get_double("problem", "delta", 0.0);
  cfg.p = static_cast<int>(ctx.cfg.get_int("problem", "p", 1));
  cfg.t_end = ctx.cfg.get_double("evolve", "t_end", 10.0);
  cfg.dt = ctx.cfg.get_double("evolve", "dt", 1e-3);
  const std::string integ = ctx.cfg.get_str("evolve", "integrator", "split-step");
  if (integ == "split-step")
    cfg.integrator = Integrator::SplitStep;
  else if (integ == "rk4")
    cfg.integrator = Integrator::RK4;
  else
    throw ConfigError("config key [evolve] integrator: split-step or rk4");
  const DisorderRealization pot = read_disorder(ctx, dims, radius);
  cfg.pot = &pot;

  const RegionIndex idx(cfg.box);
  const Eigen::VectorXcd u0 = read_initial_state(ctx, dims, idx);
  Timer t;
  const EvolutionReport rep = integrate(u0, cfg);
  manifest.add_timing("integrate", t.seconds());

  TableWriter table({"t", "norm_sq", "energy"});
  table.meta("command", "evolve");
  table.meta("norm_drift", rep.norm_drift);
  table.meta("energy_drift", rep.energy_drift);
  for (std::size_t i = 0; i < rep.sample_times.size(); ++i)
    table.row({rep.sample_times[i], rep.sample_norm_sq[i], rep.sample_energy[i]});
  atomic_write_file(ctx.path("trajectory.csv"), table.render());
  manifest.add_output(ctx.path("trajectory.csv"));

  const std::vector<double> radii = ctx.cfg.get_doubles(
      "evolve", "radii", std::vector<double>{1, 2, 4, 8});
  const TailTable tails = localization_profile(rep, radii);
  TableWriter tailtab({"R", "max_tail"});
  for (std::size_t i = 0; i < tails.radii.size(); ++i)
    tailtab.row({tails.radii[i], tails.max_tail[i]});
  atomic_write_file(ctx.path("tails.csv"), tailtab.render());
  manifest.add_output(ctx.path("tails.csv"));

  if (rep.status == EvolveStatus::Unstable) {
    manifest.set_status("error: Unstable: " + rep.message);
    return 3;
  }
  return 0;
}

int cmd_compare(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const SolverConfig scfg = read_solver_config(ctx, dims);
  const int evolve_radius = static_cast<int>(ctx.cfg.get_int("compare", "radius", 24));
  const int need =
      std::max(std::min(scfg.stage_radius(scfg.max_stage - 1) + 1, 512), evolve_radius);
  const DisorderRealization pot = read_disorder(ctx, dims, need);

  CoeffField y;
  Frequencies omega;
  if (ctx.cfg.has("compare", "field")) {
    y = CoeffField::load(ctx.cfg.get_str("compare", "field"), scfg.p, scfg.amplitudes,
                         scfg.resonant, dims);
    omega.omega = ctx.cfg.get_doubles("compare", "omega");
    if (static_cast<int>(omega.omega.size()) != dims.nu)
      throw ConfigError("config key [compare] omega: expected nu entries");
  } else {
    Timer t;
    const SolveOutcome sol = solve(scfg, pot);
    manifest.add_timing("solve", t.seconds());
    if (sol.status != SolveStatus::Converged) {
      manifest.set_status(std::string("error: ") + to_string(sol.status) +
                          (sol.message.empty() ? "" : ": " + sol.message));
      return 3;
    }
    y = sol.y;
    omega = sol.omega;
  }

  EvolutionConfig cfg;
  cfg.box = ElementaryRegion::cube(dims.d, evolve_radius);
  cfg.eps = scfg.eps;
  cfg.delta = scfg.delta;
  cfg.p = scfg.p;
  cfg.pot = &pot;
  cfg.t_end = ctx.cfg.get_double("compare", "t_end", 100.0);
  cfg.dt = ctx.cfg.get_double("compare", "dt", 1e-2);
  Timer t;
  const CompareResult cr = compare_quasiperiodic(y, omega, cfg);
  manifest.add_timing("compare", t.seconds());

  TableWriter table({"t", "norm_sq", "energy"});
  table.meta("command", "compare");
  table.meta("sup_error", cr.sup_error);
  table.meta("norm_drift", cr.report.norm_drift);
  table.meta("energy_drift", cr.report.energy_drift);
  for (std::size_t i = 0; i < cr.report.sample_times.size(); ++i)
    table.row({cr.report.sample_times[i], cr.report.sample_norm_sq[i],
               cr.report.sample_energy[i]});
  atomic_write_file(ctx.path("compare.csv"), table.render());
  manifest.add_output(ctx.path("compare.csv"));

  if (cr.report.status == EvolveStatus::Unstable) {
    manifest.set_status("error: Unstable: " + cr.report.message);
    return 3;
  }
  return 0;
}

int cmd_bench(Ctx& ctx, RunManifest& manifest) {
  const Dims dims = read_dims(ctx.cfg);
  const std::vector<int> sizes = ctx.cfg.get_ints("bench", "sizes", std::vector<int>{4, 6, 8});
  const int m0 = static_cast<int>(ctx.cfg.get_int("bench", "m0", 2));
  const double eps = ctx.cfg.get_double("problem", "eps", 1e-3);
  const double delta = ctx.cfg.get_double("problem", "delta", 1e-3);
  const int p = static_cast<int>(ctx.cfg.get_int("problem", "p", 1));

  TableWriter table({"N", "strategy", "seconds", "accuracy_vs_dense"});
  table.meta("command", "bench");
  table.meta("m0", static_cast<double>(m0));
  for (int n : sizes) {
    // diagonally dominant instance (see the covering tests): omega = 1/2,
    // potential window [0.2, 0.3], theta = 0.05
    const auto pot =
        DisorderRealization::sample({0.2, 0.3}, Box::cube(dims.d, n),
                                    substream_seed(ctx.seed, "bench"));
    const std::vector<Site> resonant = read_resonant(ctx.cfg, dims);
    std::vector<double> amps(static_cast<std::size_t>(dims.nu), 0.05);
    const CoeffField y =
        CoeffField::initial(dims, Box::cube(dims.total(), n), p, amps, resonant);
    Frequencies omega;
    omega.omega.assign(static_cast<std::size_t>(dims.nu), 0.5);
    const ElementaryRegion region = ElementaryRegion::cube(dims.total(), n);
    const LinearizedOp op = assemble_T(y, omega, 0.05, eps, delta, pot, region);

    Timer td;
    const DenseInvertOutcome dense = invert_dense(op);
    const double t_dense = td.seconds();
    if (dense.status != InvertStatus::Ok) {
      table.row_mixed({std::to_string(n), "dense", format_full(t_dense), "singular"});
      continue;
    }
    table.row_mixed({std::to_string(n), "dense", format_full(t_dense), "0"});

    {
      const ElementaryRegion inner = ElementaryRegion::cube(dims.total(), std::max(1, n / 2));
      Timer tc;
      const CoveringOutcome cov =
          invert_covering(op, inner, default_covering_patches(region, inner, m0));
      double acc = -1;
      if (cov.status == InvertStatus::Ok) {
        double num = 0, den = 0;
        const Eigen::MatrixXd& gd = dense.inverse.matrix();
        for (int c = 0; c < op.rows(); c += std::max(1, op.rows() / 16)) {
          const Eigen::VectorXd col = cov.inverse.solve(Eigen::VectorXd::Unit(op.rows(), c));
          num += (col - gd.col(c)).squaredNorm();
          den += gd.col(c).squaredNorm();
        }
        acc = std::sqrt(num / std::max(den, 1e-300));
      }
      const double t_cov = tc.seconds();
      table.row_mixed({std::to_string(n), "covering", format_full(t_cov),
                       cov.status == InvertStatus::Ok ? format_full(acc) : "no-contraction"});
    }
    {
      // bad set: every site of the middle column block
      std::vector<Site> bad;
      for (const Site& s : region.enumerate())
        if (s.linf() < 1) bad.push_back(s);
      Timer ts;
      const SchurOutcome sc = schur_reduce(op, bad);
      double acc = -1;
      if (sc.status == InvertStatus::Ok && sc.a.rows() > 0) {
        const Eigen::MatrixXd ainv = sc.a.inverse();
        const Eigen::MatrixXd& gd = dense.inverse.matrix();
        double num = 0, den = 0;
        for (std::size_t i = 0; i < sc.bad_rows.size(); ++i)
          for (std::size_t j = 0; j < sc.bad_rows.size(); ++j) {
            const double got = ainv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double want = gd(sc.bad_rows[i], sc.bad_rows[j]);
            num += (got - want) * (got - want);
            den += want * want;
          }
        acc = std::sqrt(num / std::max(den, 1e-300));
      }
      const double t_schur = ts.seconds();
      table.row_mixed({std::to_string(n), "schur", format_full(t_schur),
                       sc.status == InvertStatus::Ok ? format_full(acc) : "singular"});
    }
  }
  atomic_write_file(ctx.path("bench.csv"), table.render());
  manifest.add_output(ctx.path("bench.csv"));
  return 0;
}

int dispatch(const Args& args) {
  Ctx ctx;
  ctx.cfg = Config::load(args.config_path);
  ctx.seed = args.seed.value_or(ctx.cfg.get_u64("run", "seed", 1));
  ctx.threads = args.threads.value_or(static_cast<int>(ctx.cfg.get_int("run", "threads", 1)));
  ctx.out_dir = args.out.value_or(ctx.cfg.get_str("run", "out", "out"));
  // overrides become part of the recorded configuration
  ctx.cfg.set("run", "seed", std::to_string(ctx.seed));
  ctx.cfg.set("run", "threads", std::to_string(ctx.threads));
  fs::create_directories(ctx.out_dir);

  RunManifest manifest(args.command, ctx.cfg.snapshot());
  Timer wall;
  int rc = 0;
  try {
    if (args.command == "solve")
      rc = cmd_solve(ctx, manifest);
    else if (args.command == "sweep")
      rc = cmd_sweep(ctx, manifest);
    else if (args.command == "spectral")
      rc = cmd_spectral(ctx, manifest);
    else if (args.command == "wegner")
      rc = cmd_wegner(ctx, manifest);
    else if (args.command == "theta-scan")
      rc = cmd_theta_scan(ctx, manifest);
    else if (args.command == "dioph")
      rc = cmd_dioph(ctx, manifest);
    else if (args.command == "evolve")
      rc = cmd_evolve(ctx, manifest);
    else if (args.command == "compare")
      rc = cmd_compare(ctx, manifest);
    else if (args.command == "bench")
      rc = cmd_bench(ctx, manifest);
    else
      usage_error("unknown command " + args.command);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  }
  manifest.set_wall_seconds(wall.seconds());
  manifest.write(ctx.out_dir + "/manifest.txt");
  return rc;
}

}  // namespace qpdnls::cli

int main(int argc, char** argv) {
  try {
    return qpdnls::cli::dispatch(qpdnls::cli::parse_args(argc, argv));
  } catch (const qpdnls::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
