#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "qpdnls/disorder.hpp"
#include "qpdnls/lattice.hpp"

namespace qpdnls {

/// Frequency vector omega in R^nu.
struct Frequencies {
  std::vector<double> omega;

  int nu() const noexcept { return static_cast<int>(omega.size()); }
  /// n . omega for a frequency site n (axes == nu).
  double dot(const Site& n) const {
    double acc = 0;
    for (int i = 0; i < n.axes(); ++i) acc += n[i] * omega[static_cast<std::size_t>(i)];
    return acc;
  }
  double linf() const noexcept {
    double m = 0;
    for (double w : omega) m = std::max(m, std::abs(w));
    return m;
  }
};

/// Dense array over an axis-aligned integer box with arbitrary offsets.
/// Used for frequency profiles and convolution kernels, whose support grows
/// under exact convolution.
class NProfile {
public:
  NProfile() = default;
  NProfile(const Site& lo, std::span<const int> extents);

  static NProfile delta(const Site& n, double value = 1.0);
  static NProfile zero_like_point(int axes);  // single cell at origin, value 0

  int axes() const noexcept { return lo_.axes(); }
  const Site& lo() const noexcept { return lo_; }
  int extent(int axis) const noexcept { return ext_[static_cast<std::size_t>(axis)]; }
  std::int64_t cells() const noexcept { return static_cast<std::int64_t>(a_.size()); }

  bool covers(const Site& n) const noexcept;
  double at(const Site& n) const noexcept;  // 0 outside
  double& ref(const Site& n);               // must be inside
  Site site_at(std::int64_t flat) const;
  double max_abs() const noexcept;

  NProfile conv(const NProfile& o) const;  // exact, support = Minkowski sum
  NProfile& scale(double s) noexcept;
  NProfile& add(const NProfile& o);  // support must cover o's

  /// q-fold convolution power; q == 0 gives the delta at the origin.
  static NProfile conv_pow(const NProfile& base, int q);

private:
  Site lo_;
  std::array<std::int32_t, kMaxAxes> ext_{};
  std::vector<double> a_;
};

/// Scalar field on a box of Z^{d+nu}; one component of a coefficient pair.
class FieldArray {
public:
  FieldArray() = default;
  FieldArray(const Dims& dims, const Box& box);

  const Dims& dims() const noexcept { return dims_; }
  const Box& box() const noexcept { return box_; }
  double at(const Site& s) const noexcept;  // 0 outside box
  double& ref(const Site& s);
  const std::vector<double>& data() const noexcept { return a_; }
  std::vector<double>& data() noexcept { return a_; }

  double l2_norm_sq() const noexcept;
  double max_abs() const noexcept;

  /// Frequency profile at a fixed spatial column (zero-padded to the box's
  /// n-range).
  NProfile profile(const Site& j_spatial) const;

  /// Same values on a different box; sites outside the new box are dropped,
  /// new sites are zero.
  FieldArray on_box(const Box& box) const;

private:
  Dims dims_;
  Box box_;
  std::vector<double> a_;
};

/// Frequency-direction convolution of two components sharing a box:
/// out(j, n) = sum_m x(j, m) z(j, n-m), both factors inside the box.
/// Throws PreconditionError on mismatched grids.
FieldArray convolve_n(const FieldArray& x, const FieldArray& z);

/// The doubled coefficient pair y = (uhat, vhat) with its pinned resonant
/// data. uhat(j_k, -e_k) = a_k and vhat(j_k, +e_k) = a_k are held fixed;
/// everything else is unknown.
class CoeffField {
public:
  CoeffField() = default;

  /// The unperturbed seed field: deltas of amplitude a_k at the resonant
  /// sites, mirrored into vhat.
  static CoeffField initial(const Dims& dims, const Box& box, int p,
                            std::vector<double> amplitudes,
                            std::vector<Site> resonant_spatial);

  const Dims& dims() const noexcept { return dims_; }
  const Box& box() const noexcept { return uhat_.box(); }
  int p() const noexcept { return p_; }
  int num_modes() const noexcept { return static_cast<int>(amps_.size()); }
  const std::vector<double>& amplitudes() const noexcept { return amps_; }
  const std::vector<Site>& resonant_spatial() const noexcept { return res_; }

  /// Pinned site (j_k, -e_k) of the uhat component.
  Site pinned_site(int k) const;
  /// Mirror site (j_k, +e_k) of the vhat component.
  Site mirror_site(int k) const;
  bool is_pinned_u(const Site& s) const;
  bool is_pinned_v(const Site& s) const;
  /// Member of S ∪ -S (either orientation).
  bool is_resonant_site(const Site& s) const;

  const FieldArray& uhat() const noexcept { return uhat_; }
  const FieldArray& vhat() const noexcept { return vhat_; }
  FieldArray& uhat() noexcept { return uhat_; }
  FieldArray& vhat() noexcept { return vhat_; }

  /// Re-imposes the pinned values exactly.
  void pin();
  double pinning_error() const;
  /// max |vhat(j,n) - uhat(j,-n)| over sites whose mirror lies in the box.
  double conjugate_asymmetry() const;

  CoeffField on_box(const Box& box) const;
  /// l2 norm of the concatenated (uhat, vhat) vector.
  double norm() const noexcept;
  /// l2 norm of the difference field (boxes may differ).
  static double diff_norm(const CoeffField& a, const CoeffField& b);

  /// Largest |coordinate| over the support (H1-style support radius); 0 for
  /// the seed field's box when empty.
  int support_radius(double floor = 0.0) const;

  /// sum over (j,n) not in S of e^{c(|n|+|j|)} |uhat(j,n)|.
  double weighted_offres_sum(double c) const;

  /// Text dump "j, n, uhat, vhat" in site order at full precision.
  std::string dump() const;
  static CoeffField parse_dump(std::istream& in, int p, std::vector<double> amplitudes,
                               std::vector<Site> resonant_spatial, const Dims& dims);
  void save(const std::string& path) const;
  static CoeffField load(const std::string& path, int p, std::vector<double> amplitudes,
                         std::vector<Site> resonant_spatial, const Dims& dims);

private:
  Dims dims_;
  int p_ = 1;
  FieldArray uhat_, vhat_;
  std::vector<double> amps_;
  std::vector<Site> res_;  // spatial sites j_k
};

/// Residual of the doubled coefficient system on the field's box.
struct Residual {
  FieldArray f1, f2;

  /// l2 norm excluding the pinned rows (f1 on S, f2 on -S).
  double norm_off_pinned(const CoeffField& y) const;
};

/// Evaluates the doubled nonlinear map
///   F1 = (n.omega + eps*Lap_j + V_j) uhat + delta (uhat*vhat)^{*p} * uhat
///   F2 = (-n.omega + eps*Lap_j + V_j) vhat + delta (uhat*vhat)^{*p} * vhat
/// with frequency-direction convolutions and zero padding outside the box.
Residual eval_F(const CoeffField& y, const Frequencies& omega, double eps, double delta,
                const DisorderRealization& pot);

/// u(site, t) = sum_n uhat(site, n) e^{i n.omega t}.
std::complex<double> reconstruct_u(const CoeffField& y, const Frequencies& omega,
                                   const Site& spatial_site, double t);

struct DecayFit {
  double alpha = kInfinity;     // +inf sentinel when nothing to fit
  double max_violation = 0.0;   // max over fitted sites of |y|e^{alpha|k|}-1, clamped at 0
};

/// Least-squares exponential decay of the field about the origin, fitted
/// over sites with |k| > d+nu (the pinned head is excluded by construction).
DecayFit decay_fit(const CoeffField& y);

/// Largest alpha with |y(k)| <= e^{-alpha |k|} over the fitted site set,
/// i.e. min_k (-log |y(k)|) / |k|; +infinity when nothing qualifies. This is
/// the uniform-envelope rate, which the least-squares slope overshoots by
/// construction whenever max_violation > 0.
double uniform_decay_rate(const CoeffField& y);

/// Convolution kernels of the linearization at a fixed spatial column:
///   k11 = (p+1) (u*v)^{*p}
///   k12 = p (u*v)^{*(p-1)} * u * u
///   k21 = p (u*v)^{*(p-1)} * v * v
/// (k22 equals k11).
struct SKernels {
  NProfile k11, k12, k21;
};
SKernels build_s_kernels(const CoeffField& y, const Site& j_spatial);

}  // namespace qpdnls
