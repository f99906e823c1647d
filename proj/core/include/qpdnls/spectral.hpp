#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qpdnls/disorder.hpp"
#include "qpdnls/field.hpp"

namespace qpdnls {

/// Thrown when an energy sits in the spectrum of the restricted operator
/// (within 1e-12), so the Green's function is not defined.
class NotResolventError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct EigenData {
  ElementaryRegion region;
  RegionIndex index;
  Eigen::VectorXd mu;       // eigenvalues, ascending
  Eigen::MatrixXd psi;      // orthonormal eigenvector columns
  std::vector<Site> centers;  // per-column argmax site

  /// max_n |H psi_n - mu_n psi_n| / max(|mu_n|, 1).
  double max_eigen_residual(double eps, const DisorderRealization& pot) const;
  double max_orthonormality_defect() const;
};

/// Dense symmetric eigendecomposition of eps*Laplacian + V on the region.
EigenData eig_region(double eps, const DisorderRealization& pot,
                     const ElementaryRegion& region, int dense_eig_cap = 4000);

/// Per-eigenvector exponential decay rate about its center, by least squares
/// over sites at l1 distance >= 1 from the center.
std::vector<double> eigenvector_decay_rates(const EigenData& ed);

/// Green's function (H - E)^{-1}, factorization-based and then symmetrized
/// by pairwise averaging, so G(j, j') == G(j', j) holds bitwise while the
/// exponentially small far entries keep their relative accuracy. Throws
/// NotResolventError when E is within 1e-12 of the restricted spectrum.
Eigen::MatrixXd green_function(double eps, const DisorderRealization& pot,
                               const EigenData& ed, double e_energy);

struct RegularityReport {
  double e = 0;
  double m = 0;
  bool regular = false;
  Site worst_j, worst_jp;
  double worst_g = 0;      // |G(E; j, j')| at the worst pair
  double worst_bound = 0;  // e^{-m |j-j'|} at the worst pair
};

/// Tests |G_region(E; j, j')| <= e^{-m|j-j'|} for pairs |j-j'| > L/4, where
/// 2L is the region diameter. All pairs are tested for L <= 30; beyond that
/// only pairs with j on the interior boundary ring (the use case of the
/// resolvent expansions). Throws NotResolventError when E is within 1e-12
/// of the restricted spectrum.
RegularityReport check_regular(double eps, const DisorderRealization& pot,
                               const ElementaryRegion& region, double e_energy, double m,
                               int dense_eig_cap = 4000);

struct SeparationRow {
  double min_gap = 0;
  double threshold = 0;
  bool violates = false;
};

struct SeparationStat {
  std::vector<SeparationRow> rows;
  double violation_fraction = 0;
};

/// Minimum eigenvalue gaps between restricted spectra of disjoint region
/// pairs against the e^{-L^beta} threshold.
SeparationStat separation_stat(double eps, const DisorderRealization& pot,
                               const std::vector<std::pair<ElementaryRegion, ElementaryRegion>>& pairs,
                               double beta, int dense_eig_cap = 4000);

struct WegnerTable {
  std::vector<double> kappa;
  std::vector<double> prob;        // empirical Prob{dist(E, sigma(H_S)) <= kappa}
  double slope = 0;                // through-origin least-squares slope of prob vs kappa
  double slope_reference = 0;      // |S| * sup-density scale of the linear bound
  int trials = 0;
};

/// Monte-Carlo of dist(E, sigma(H_S)) over fresh realizations. Requires
/// trials >= 100.
WegnerTable wegner_stat(double eps, const Distribution& dist, const ElementaryRegion& s_region,
                        double e_energy, const std::vector<double>& kappas, int trials,
                        std::uint64_t seed, int threads = 1);

struct SeparationBand {
  long dist = 0;
  int count = 0;
  double median_ratio = 0;  // +inf entries participate as largest
  double min_ratio = 0;
};

struct SeparationDiagnostic {
  double chi_rate = 0;
  std::vector<SeparationBand> bands;  // keyed by |i - i'|
  long cutoff_dist = -1;  // smallest distance from which every band has median >= 10
};

/// Statistics of |lambda_i - lambda_i'| / K(i,i') for the product-space
/// eigenvalues lambda_(j,n) = n.omega + mu_j, where K is the chi-weighted
/// eigenvector overlap, chi(l) = e^{-chi_rate |l|}. Positions in the pair
/// distance are (n, localization center).
SeparationDiagnostic separation_1_17(double eps, const DisorderRealization& pot,
                                     const Frequencies& omega, const ElementaryRegion& region,
                                     double chi_rate, const Dims& dims,
                                     int dense_eig_cap = 4000);

}  // namespace qpdnls
