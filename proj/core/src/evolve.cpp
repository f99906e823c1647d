#include "qpdnls/evolve.hpp"

#include <cmath>

namespace qpdnls {

namespace {

using Cplx = std::complex<double>;

Eigen::VectorXcd nonlinear_phase_step(const Eigen::VectorXcd& u, double delta, int p,
                                      double dt) {
  Eigen::VectorXcd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a2 = std::norm(u[i]);
    const double phase = -delta * std::pow(a2, p) * dt;
    out[i] = u[i] * Cplx(std::cos(phase), std::sin(phase));
  }
  return out;
}

}  // namespace

double hamiltonian(const Eigen::VectorXcd& u, const Eigen::MatrixXd& h_lin, double delta,
                   int p) {
  const Cplx quad = u.dot(h_lin * u);  // <u, H u>, real for symmetric H
  double quartic = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) quartic += std::pow(std::norm(u[i]), p + 1);
  return 0.5 * (quad.real() + delta / (p + 1) * quartic);
}

EvolutionReport integrate(const Eigen::VectorXcd& u0, const EvolutionConfig& cfg,
                          const SampleCallback& on_sample) {
  cfg.validate();
  EvolutionReport rep;
  rep.index = RegionIndex(cfg.box);
  const int n = rep.index.size();
  if (u0.size() != n) throw PreconditionError("integrate: u0 size does not match region");

  const SpatialOperator hop = assemble_H(cfg.eps, *cfg.pot, cfg.box);
  const Eigen::MatrixXd h_lin = hop.matrix();

  const long total_steps = std::lround(cfg.t_end / cfg.dt);
  const long sample_every =
      std::max<long>(1, cfg.samples > 1 ? total_steps / (cfg.samples - 1) : total_steps);
  const long checkpoint_every =
      std::max<long>(1, cfg.checkpoints > 1 ? total_steps / (cfg.checkpoints - 1) : total_steps);

  // Split-step machinery: exact linear flow through the eigendecomposition.
  Eigen::MatrixXcd qc;
  Eigen::VectorXd lambda;
  Eigen::VectorXcd phase_half;
  if (cfg.integrator == Integrator::SplitStep) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_lin);
    lambda = es.eigenvalues();
    qc = es.eigenvectors().cast<Cplx>();
    phase_half.resize(n);
    for (int i = 0; i < n; ++i) {
      const double ph = -lambda[i] * cfg.dt / 2;
      phase_half[i] = Cplx(std::cos(ph), std::sin(ph));
    }
  }

  auto rk4_rhs = [&](const Eigen::VectorXcd& u) -> Eigen::VectorXcd {
    Eigen::VectorXcd f = h_lin * u;
    if (cfg.delta != 0) {
      for (int i = 0; i < n; ++i)
        f[i] += cfg.delta * std::pow(std::norm(u[i]), cfg.p) * u[i];
    }
    return Cplx(0, -1) * f;
  };

  Eigen::VectorXcd u = u0;
  const double norm0_sq = u.squaredNorm();
  const double energy0 = hamiltonian(u, h_lin, cfg.delta, cfg.p);

  auto record = [&](double t, long step) {
    if (step % sample_every == 0 || step == total_steps) {
      rep.sample_times.push_back(t);
      Eigen::VectorXd abs2(n);
      for (int i = 0; i < n; ++i) abs2[i] = std::norm(u[i]);
      rep.sample_abs2.push_back(std::move(abs2));
      rep.sample_norm_sq.push_back(u.squaredNorm());
      rep.sample_energy.push_back(hamiltonian(u, h_lin, cfg.delta, cfg.p));
      if (on_sample) on_sample(t, u);
    }
    if (step % checkpoint_every == 0 || step == total_steps) {
      rep.checkpoint_times.push_back(t);
      rep.checkpoint_states.push_back(u);
    }
  };

  record(0.0, 0);
  for (long step = 1; step <= total_steps; ++step) {
    if (cfg.integrator == Integrator::SplitStep) {
      u = qc * phase_half.cwiseProduct(qc.adjoint() * u);
      if (cfg.delta != 0) u = nonlinear_phase_step(u, cfg.delta, cfg.p, cfg.dt);
      u = qc * phase_half.cwiseProduct(qc.adjoint() * u);
    } else {
      const Eigen::VectorXcd k1 = rk4_rhs(u);
      const Eigen::VectorXcd k2 = rk4_rhs(u + 0.5 * cfg.dt * k1);
      const Eigen::VectorXcd k3 = rk4_rhs(u + 0.5 * cfg.dt * k2);
      const Eigen::VectorXcd k4 = rk4_rhs(u + cfg.dt * k3);
      u += (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    record(static_cast<double>(step) * cfg.dt, step);
  }

  for (std::size_t i = 0; i < rep.sample_times.size(); ++i) {
    rep.norm_drift = std::max(rep.norm_drift, std::abs(rep.sample_norm_sq[i] - norm0_sq));
    rep.energy_drift = std::max(rep.energy_drift, std::abs(rep.sample_energy[i] - energy0));
  }
  if (rep.norm_drift > 1e-2) {
    rep.status = EvolveStatus::Unstable;
    rep.message = "norm drift exceeds 1e-2; reduce dt";
  }
  return rep;
}

Eigen::VectorXcd reconstruct_field(const CoeffField& y, const Frequencies& omega,
                                   const RegionIndex& index, double t) {
  Eigen::VectorXcd u(index.size());
  for (int i = 0; i < index.size(); ++i) u[i] = reconstruct_u(y, omega, index[i], t);
  return u;
}

CompareResult compare_quasiperiodic(const CoeffField& y, const Frequencies& omega,
                                    const EvolutionConfig& cfg) {
  cfg.validate();
  // Box must cover the support with a 3/alpha margin.
  const Dims& dims = y.dims();
  int supp = 0;
  {
    const Box& b = y.box();
    const std::int64_t cells = b.cardinality();
    for (std::int64_t i = 0; i < cells; ++i) {
      const Site s = b.site_at(i);
      if (std::abs(y.uhat().at(s)) > 1e-14 || std::abs(y.vhat().at(s)) > 1e-14)
        supp = std::max(supp, s.spatial(dims).linf());
    }
  }
  const double alpha = decay_fit(y).alpha;
  const int margin = std::isfinite(alpha) && alpha > 0
                         ? static_cast<int>(std::ceil(3.0 / alpha))
                         : 0;
  int box_r = cfg.box.base().radius[0];
  for (int a = 1; a < cfg.box.axes(); ++a)
    box_r = std::min(box_r, static_cast<int>(cfg.box.base().radius[static_cast<std::size_t>(a)]));
  if (box_r < supp + margin)
    throw PreconditionError("compare_quasiperiodic: box must extend 3/alpha beyond the support");

  const RegionIndex index(cfg.box);
  const Eigen::VectorXcd u0 = reconstruct_field(y, omega, index, 0.0);
  CompareResult out;
  const SampleCallback cb = [&](double t, const Eigen::VectorXcd& u) {
    const Eigen::VectorXcd want = reconstruct_field(y, omega, index, t);
    out.sup_error = std::max(out.sup_error, (u - want).norm());
  };
  out.report = integrate(u0, cfg, cb);
  return out;
}

TailTable localization_profile(const EvolutionReport& report, const std::vector<double>& radii) {
  TailTable out;
  out.radii = radii;
  out.max_tail.assign(radii.size(), 0.0);
  for (std::size_t s = 0; s < report.sample_abs2.size(); ++s) {
    const Eigen::VectorXd& abs2 = report.sample_abs2[s];
    for (std::size_t r = 0; r < radii.size(); ++r) {
      double tail = 0;
      for (int i = 0; i < report.index.size(); ++i)
        if (report.index[i].linf() > radii[r]) tail += abs2[i];
      out.max_tail[r] = std::max(out.max_tail[r], tail);
    }
  }
  return out;
}

}  // namespace qpdnls
