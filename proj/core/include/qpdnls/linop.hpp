#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qpdnls/field.hpp"

namespace qpdnls {

inline constexpr int kDefaultDenseCapSites = 6000;

enum class Block : int { U = 0, V = 1 };

struct Dof {
  Block block = Block::U;
  Site site;
};

/// Which rows/columns are removed from the doubled operator.
///  - None: all 2|region| degrees of freedom.
///  - PinnedEntries: the pinned unknowns are removed (u on S, v on -S);
///    this is the Newton-step operator.
///  - ResonantSites: both blocks are removed at every site of S ∪ -S;
///    this is the convention of the theta-shifted scans.
enum class PinPolicy { None, PinnedEntries, ResonantSites };

/// The linearized operator T^theta = D^theta + delta S restricted to a
/// region, stored structurally: D-block diagonal in n with Laplacian
/// coupling, S-block Toeplitz in n and diagonal in j.
class LinearizedOp {
public:
  LinearizedOp() = default;

  int rows() const noexcept { return static_cast<int>(dofs_.size()); }
  const std::vector<Dof>& dofs() const noexcept { return dofs_; }
  const Dof& dof(int row) const noexcept { return dofs_[static_cast<std::size_t>(row)]; }
  int find_dof(Block b, const Site& s) const noexcept;
  const ElementaryRegion& region() const noexcept { return region_; }
  const Dims& dims() const noexcept { return dims_; }
  double theta() const noexcept { return theta_; }
  double eps() const noexcept { return eps_; }
  double delta() const noexcept { return delta_; }

  /// D-part of the diagonal (without the S contribution).
  double d_diag(int row) const noexcept { return diag_[static_cast<std::size_t>(row)]; }
  /// Full matrix entry (D + delta S).
  double entry(int row, int col) const;
  /// Emits the nonzero entries of a row as (col, value); a column may be
  /// emitted more than once, contributions add.
  void row_entries(int row, const std::function<void(int, double)>& emit) const;

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  /// l1 distance between the sites of two rows.
  long site_distance(int a, int b) const;

  friend LinearizedOp assemble_T(const CoeffField&, const Frequencies&, double, double,
                                 double, const DisorderRealization&, const ElementaryRegion&,
                                 PinPolicy);

private:
  Dims dims_;
  ElementaryRegion region_;
  double theta_ = 0, eps_ = 0, delta_ = 0;
  std::vector<Dof> dofs_;
  std::vector<double> diag_;
  std::unordered_map<Site, int, SiteHash> urow_, vrow_;
  // Kernels per spatial column present in the region (empty when delta == 0).
  std::unordered_map<Site, SKernels, SiteHash> kernels_;
};

/// Assembles T^theta(y) on `region`. Preconditions: the region's spatial
/// projection lies in pot's box, and y's box contains the region (so the
/// differentiated convolutions are the ones eval_F uses).
LinearizedOp assemble_T(const CoeffField& y, const Frequencies& omega, double theta,
                        double eps, double delta, const DisorderRealization& pot,
                        const ElementaryRegion& region, PinPolicy pin = PinPolicy::None);

struct InverseReport {
  double norm_inv = 0;          // operator norm estimate of T^{-1}
  double offdiag_rate = 0;      // fitted exponential decay rate of |T^{-1}(k,k')|
  double max_entry_beyond = 0;  // max |T^{-1}(k,k')| over |k-k'| > diam/10
  double condition = 0;         // condition-number estimate
};

enum class InvertStatus { Ok, Singular, NoContraction, PatchMissing };

/// A dense factorization-backed inverse.
class DenseInverse {
public:
  DenseInverse() = default;
  explicit DenseInverse(Eigen::MatrixXd m);

  int rows() const noexcept { return static_cast<int>(lu_.rows()); }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return lu_.solve(b); }
  Eigen::VectorXd solve_transposed(const Eigen::VectorXd& b) const {
    return lu_.transpose().solve(b);
  }
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& b) const { return lu_.solve(b); }
  /// Materializes (and caches) the full inverse.
  const Eigen::MatrixXd& matrix() const;
  /// Smallest |pivot| of the factorization and its index.
  std::pair<double, int> min_pivot() const;
  double rcond() const { return lu_.rcond(); }
  /// 2-norm estimate of T^{-1} by a fixed-iteration power method on
  /// T^{-T} T^{-1} applied through the factorization.
  double norm_est(int iters = 50) const;

private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable std::shared_ptr<Eigen::MatrixXd> inv_;
};

struct DenseInvertOutcome {
  InvertStatus status = InvertStatus::Ok;
  int singular_index = -1;
  double singular_pivot = 0;
  DenseInverse inverse;
  InverseReport report;
};

/// Factorization-based inversion. Throws PreconditionError when the region
/// cardinality exceeds the dense cap; reports Singular (with the offending
/// pivot) as a first-class outcome.
DenseInvertOutcome invert_dense(const LinearizedOp& op,
                                int dense_cap_sites = kDefaultDenseCapSites);

/// Decay-rate fit of the inverse's off-diagonal entries, |k-k'| > diam/10.
/// Inversion failures propagate through the outcome status.
struct GreenDecayOutcome {
  InvertStatus status = InvertStatus::Ok;
  InverseReport report;
};
GreenDecayOutcome green_decay(const LinearizedOp& op,
                              int dense_cap_sites = kDefaultDenseCapSites);

/// Exponential fit of |G| against site distance over dist > cutoff.
/// rate is +infinity when every qualifying entry is below 1e-300.
struct MatrixDecayFit {
  double rate = kInfinity;
  double max_entry_beyond = 0;
};
MatrixDecayFit fit_matrix_decay(const Eigen::MatrixXd& g, const std::vector<long>& pair_dist,
                                double cutoff);
/// Convenience: distances from dof sites of an operator.
std::vector<long> dof_pair_distances(const LinearizedOp& op);

struct CoveringOptions {
  int m0 = 2;                  // patch margin M0
  double tol = 1e-13;          // fixed-point stopping tolerance
  int max_iter = 400;
  int norm_power_iters = 20;   // power-method iterations for the report
  int decay_sample_columns = 48;
};

/// Matvec-capable inverse of T on a big box assembled from an inner-box
/// inverse and M0-patch inverses through the resolvent identity.
class CoveringInverse {
public:
  int rows() const noexcept { return rows_; }
  /// Applies T^{-1} by the resolvent-identity fixed-point iteration.
  Eigen::VectorXd solve(const Eigen::VectorXd& f) const;
  /// Rigorous bound on the boundary-coupling contraction factor.
  double contraction() const noexcept { return contraction_; }
  int last_iterations() const noexcept { return last_iters_; }

private:
  friend struct CoveringBuilder;
  struct PatchData {
    std::vector<int> rows;                    // global rows of the patch
    std::unordered_map<int, int> local;       // global row -> local index
    DenseInverse inv;
    Eigen::VectorXd out_abs_row_sum;          // sum_{k'' outside} |T(k',k'')| per local row
    std::vector<std::vector<std::pair<int, double>>> couplings;  // local row -> (global col outside, value)
  };
  const LinearizedOp* op_ = nullptr;
  int rows_ = 0;
  std::vector<PatchData> patches_;
  std::vector<int> assign_;  // dof row -> patch index
  double contraction_ = 0;
  CoveringOptions opts_;
  mutable int last_iters_ = 0;
};

struct CoveringOutcome {
  InvertStatus status = InvertStatus::Ok;
  std::optional<Site> missing_site;  // set on PatchMissing
  double contraction = 0;
  CoveringInverse inverse;  // valid when Ok; keeps a pointer to op
  InverseReport report;
};

/// Builds the covering inverse of `op` from the designated inner region and
/// the patch regions (their restricted operators are factorized here and
/// held by the result). Fails first-class with PatchMissing when some site
/// has no admissible W(k) at margin M0, and with NoContraction when the
/// boundary-coupling contraction factor reaches 1/2.
CoveringOutcome invert_covering(const LinearizedOp& op, const ElementaryRegion& inner,
                                const std::vector<ElementaryRegion>& patch_regions,
                                const CoveringOptions& opts = {});

/// Default patch layout for a cube region: the inner box plus M0-cubes
/// centered on a lattice of spacing M0 covering the annulus.
std::vector<ElementaryRegion> default_covering_patches(const ElementaryRegion& outer,
                                                       const ElementaryRegion& inner, int m0);

struct SchurOutcome {
  InvertStatus status = InvertStatus::Ok;
  Eigen::MatrixXd a;            // Schur complement on the bad block
  std::vector<int> bad_rows;    // rows of op forming the bad block
  std::vector<int> good_rows;
  InverseReport good_report;    // report of the good-block inverse
  DenseInverse good_inverse;    // valid when the good block is nonempty
};

/// A = R_bad T R_bad - R_bad T R_good (T_good)^{-1} R_good T R_bad.
/// bad_sites selects whole sites (both blocks).
SchurOutcome schur_reduce(const LinearizedOp& op, const std::vector<Site>& bad_sites,
                          int dense_cap_sites = kDefaultDenseCapSites);

/// Coordinate text dump "block row-site block col-site value" for small
/// instances (test fixtures); duplicate structural contributions are summed.
std::string dump_coordinates(const LinearizedOp& op);

}  // namespace qpdnls
