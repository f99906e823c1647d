#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "qpdnls/field.hpp"

namespace qpdnls {

enum class Integrator { SplitStep, RK4 };

struct EvolutionConfig {
  ElementaryRegion box;  // spatial truncation, zero (Dirichlet) outside
  double eps = 0;
  double delta = 0;
  int p = 1;
  const DisorderRealization* pot = nullptr;
  double t_end = 10.0;
  double dt = 1e-3;
  Integrator integrator = Integrator::SplitStep;
  int samples = 200;      // uniformly spaced sample times (plus t = 0)
  int checkpoints = 10;   // full-state storage points

  void validate() const {
    if (!(dt > 0) || !(t_end >= 0)) throw PreconditionError("EvolutionConfig: dt > 0, t_end >= 0");
    if (!pot) throw PreconditionError("EvolutionConfig: potential required");
    if (p < 1) throw PreconditionError("EvolutionConfig: p >= 1");
  }
};

enum class EvolveStatus { Ok, Unstable };

struct EvolutionReport {
  EvolveStatus status = EvolveStatus::Ok;
  std::string message;
  RegionIndex index;
  std::vector<double> sample_times;
  std::vector<Eigen::VectorXd> sample_abs2;  // per-site |u|^2 at sample times
  std::vector<double> sample_norm_sq;
  std::vector<double> sample_energy;
  std::vector<double> checkpoint_times;
  std::vector<Eigen::VectorXcd> checkpoint_states;
  double norm_drift = 0;    // max |  |u(t)|^2 - |u(0)|^2 |
  double energy_drift = 0;  // max | H(t) - H(0) |
};

using SampleCallback = std::function<void(double, const Eigen::VectorXcd&)>;

/// Hamiltonian (1/2)[ <u, (eps Lap + V) u> + (delta/(p+1)) sum |u_j|^{2(p+1)} ].
double hamiltonian(const Eigen::VectorXcd& u, const Eigen::MatrixXd& h_lin, double delta, int p);

/// Integrates i du/dt = (eps Lap + V) u + delta |u|^{2p} u on the truncated
/// box with zero boundary. The split-step scheme alternates the exact flow
/// of the linear part (through one dense eigendecomposition) with the exact
/// diagonal phase flow of the nonlinearity; RK4 is the fixed-step explicit
/// alternative. A norm drift beyond 1e-2 flags the run Unstable.
EvolutionReport integrate(const Eigen::VectorXcd& u0, const EvolutionConfig& cfg,
                          const SampleCallback& on_sample = nullptr);

/// Spatial field of the quasi-periodic ansatz at time t over the region.
Eigen::VectorXcd reconstruct_field(const CoeffField& y, const Frequencies& omega,
                                   const RegionIndex& index, double t);

struct CompareResult {
  double sup_error = 0;  // sup over sampled t of |u_num(t) - u_rec(t)|_2
  EvolutionReport report;
};

/// Integrates from the ansatz's t = 0 field and compares against the
/// reconstruction at every sample time. Preconditions: the box covers the
/// spatial support of y and extends at least 3/alpha beyond it.
CompareResult compare_quasiperiodic(const CoeffField& y, const Frequencies& omega,
                                    const EvolutionConfig& cfg);

struct TailTable {
  std::vector<double> radii;
  std::vector<double> max_tail;  // max over sampled t of the l2 mass outside [-R,R]^d
};

TailTable localization_profile(const EvolutionReport& report, const std::vector<double>& radii);

}  // namespace qpdnls
