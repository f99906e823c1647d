#pragma once

#include <vector>

#include "qpdnls/linop.hpp"

namespace qpdnls {

struct DiophantineParams {
  double a_exp = 2.0;  // exponent A
  double c = 0.1;      // constant c
  int n_range = 100;   // range bound N
  void validate() const {
    if (!(a_exp > 0) || !(c > 0) || n_range < 1)
      throw PreconditionError("DiophantineParams: A > 0, c > 0, N >= 1 required");
  }
};

struct DiophantineReport {
  bool ok = true;
  Site worst_n;         // minimizer of |n.omega|_T * |n|^A / c
  double worst_norm = 0;   // |n.omega|_T there
  double worst_bound = 0;  // c / |n|^A there
};

/// Exhaustive check of |n.omega|_T >= c / |n|^A over n in [-N,N]^nu \ {0}.
DiophantineReport check_diophantine(const Frequencies& omega, const DiophantineParams& params);

/// Distance of x to the nearest integer.
double torus_norm(double x);

/// Sorted disjoint union of closed intervals.
class IntervalUnion {
public:
  void add(double lo, double hi);
  void merge();  // sorts and coalesces overlapping intervals
  const std::vector<std::pair<double, double>>& intervals() const noexcept { return iv_; }
  double total_length() const noexcept;
  bool contains(double x) const noexcept;
  std::size_t size() const noexcept { return iv_.size(); }

private:
  std::vector<std::pair<double, double>> iv_;
  bool merged_ = true;
};

/// The exactly-computable stage-0 exclusion set: the theta where some
/// diagonal entry over [-M,M]^{d+nu} \ (S ∪ -S) comes within
/// 2 max(e^{-M^beta}, sqrt(eps+delta)) of zero, merged exactly.
IntervalUnion step0_exclusion(int m_scale, double beta, double eps, double delta,
                              const Frequencies& omega, const DisorderRealization& pot,
                              const std::vector<Site>& resonant_spatial, const Dims& dims);

/// Companion bound 4 (2M+1)^{d+nu} max(e^{-M^beta}, sqrt(eps+delta)).
double step0_bound(int m_scale, double beta, double eps, double delta, const Dims& dims);

struct ThetaGrid {
  double lo = 0, hi = 0, step = 1e-4;
  std::size_t count() const {
    if (!(step > 0) || hi < lo) throw PreconditionError("ThetaGrid: bad grid");
    return static_cast<std::size_t>((hi - lo) / step + 0.5) + 1;
  }
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

struct ThetaScanConfig {
  int n_scale = 4;       // box radius N
  double beta = 0.75;    // norm threshold exponent of the goodness test
  double gamma = 0.0;    // decay threshold (0 disables the decay test)
  ThetaGrid grid;
  int dense_cap_sites = kDefaultDenseCapSites;
  int decay_sample_columns = 0;  // 0 = full inverse for the decay fit
  int norm_power_iters = 50;     // power-method budget per grid point
  int threads = 1;
};

struct ThetaScan {
  ThetaScanConfig cfg;
  std::vector<double> theta;
  std::vector<double> norm_inv;
  std::vector<double> rate;
  std::vector<std::uint8_t> bad;
  double measure_estimate = 0;  // step * count(bad)
  double norm_threshold = 0;    // (1/2) e^{N^beta}
};

/// Sufficient scan half-width: nothing is bad outside
/// N sum|omega_k| + spectrum radius + exclusion radius margin.
double default_theta_halfwidth(int n_scale, const Frequencies& omega, double eps,
                               const Distribution& dist, const Dims& dims);

/// Grid scan of the theta-shifted operator on [-N,N]^{d+nu} (resonant sites
/// removed): a point is bad when the inverse-norm goodness test fails, i.e.
/// ||(T^theta)^{-1}|| >= (1/2) e^{N^beta} -- equivalently the smallest
/// singular value is within 2 e^{-N^beta} of zero, matching the stage-0
/// exclusion margin -- or when the fitted off-diagonal decay rate over
/// |k-k'| > N/10 falls below gamma, or when the inversion is singular.
ThetaScan theta_scan(const CoeffField& y, const Frequencies& omega, double eps, double delta,
                     const DisorderRealization& pot, const ThetaScanConfig& cfg);

/// Least-squares exponent of the e^{-N^sigma} model: the slope of
/// log(-log mes) against log N, intercept free, over points with
/// 0 < mes < 1.
double fit_sigma(const std::vector<int>& n_values, const std::vector<double>& measures);

}  // namespace qpdnls
