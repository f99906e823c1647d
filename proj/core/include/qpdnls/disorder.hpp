#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>

#include "qpdnls/lattice.hpp"

namespace qpdnls {

/// Uniform distribution on [lo, hi]. Degenerate lo == hi is allowed for
/// constant-potential tests.
struct Distribution {
  double lo = 0.0;
  double hi = 1.0;
  void validate() const {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw PreconditionError("Distribution: need finite lo <= hi");
  }
  double width() const noexcept { return hi - lo; }
  /// Density sup norm (infinite for the degenerate case).
  double density_sup() const noexcept { return hi > lo ? 1.0 / (hi - lo) : kInfinity; }
};

/// An i.i.d. uniform potential {v_j} on a spatial box.
///
/// Values are per-site keyed: v_j is a pure hash of (seed, j), so growing or
/// shifting the box never reshuffles the realization. The values at chosen
/// resonant sites can be overridden independently, which is how the
/// resonant potentials serve as sweep parameters.
class DisorderRealization {
public:
  DisorderRealization() = default;

  static DisorderRealization sample(const Distribution& dist, const Box& box,
                                    std::uint64_t seed);

  const Box& box() const noexcept { return box_; }
  const Distribution& dist() const noexcept { return dist_; }
  std::uint64_t seed() const noexcept { return seed_; }

  bool covers(const Site& j) const noexcept { return box_.contains(j); }
  /// v_j; throws PreconditionError when j is outside the box.
  double value(const Site& j) const;
  /// Hash value ignoring overrides (exposed for serialization checks).
  double hashed_value(const Site& j) const noexcept;

  /// Overrides the potential at one site (resonant-site parameterization).
  void set_value(const Site& j, double v);
  const std::unordered_map<Site, double, SiteHash>& overrides() const noexcept {
    return overrides_;
  }

  /// Copy with resonant overrides applied at `sites` taking values `vals`.
  DisorderRealization with_overrides(std::span<const Site> sites,
                                     std::span<const double> vals) const;

  /// Text table "j-coordinates, value" with a (seed, dist, box) header.
  std::string serialize() const;
  static DisorderRealization deserialize(std::istream& in);
  void save(const std::string& path) const;
  static DisorderRealization load(const std::string& path);

private:
  Box box_;
  Distribution dist_;
  std::uint64_t seed_ = 0;
  std::unordered_map<Site, double, SiteHash> overrides_;
  // Set when reloaded from a value table; preserves full-precision values
  // even if they did not come from the hash path.
  std::unordered_map<Site, double, SiteHash> table_;
  bool from_table_ = false;
};

/// The operator eps*Laplacian + V restricted to a spatial elementary region.
/// Off-diagonal entries are exactly eps at l1-distance 1 inside the region.
struct SpatialOperator {
  ElementaryRegion region;
  double eps = 0.0;
  const DisorderRealization* pot = nullptr;
  RegionIndex index;

  Eigen::MatrixXd matrix() const;
};

/// Throws PreconditionError when the region is not covered by pot's box.
SpatialOperator assemble_H(double eps, const DisorderRealization& pot,
                           const ElementaryRegion& region);

/// Almost-sure spectrum bounds of eps*Laplacian + V on Z^d:
/// [-2 eps d + lo, 2 eps d + hi].
std::pair<double, double> spectrum_bounds(double eps, const Distribution& dist, int d);

}  // namespace qpdnls
