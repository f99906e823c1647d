#include "qpdnls/measure.hpp"

#include <algorithm>
#include <cmath>

namespace qpdnls {

double torus_norm(double x) {
  const double frac = x - std::floor(x);
  return std::min(frac, 1.0 - frac);
}

DiophantineReport check_diophantine(const Frequencies& omega, const DiophantineParams& params) {
  params.validate();
  const int nu = omega.nu();
  const Box nbox = Box::cube(nu, params.n_range);
  DiophantineReport rep;
  rep.ok = true;
  double worst_margin = kInfinity;
  const std::int64_t cells = nbox.cardinality();
  for (std::int64_t i = 0; i < cells; ++i) {
    const Site n = nbox.site_at(i);
    if (n == Site::zero(nu)) continue;
    const double tn = torus_norm(omega.dot(n));
    const double bound = params.c / std::pow(static_cast<double>(n.l1()), params.a_exp);
    const double margin = tn - bound;
    if (margin < worst_margin) {
      worst_margin = margin;
      rep.worst_n = n;
      rep.worst_norm = tn;
      rep.worst_bound = bound;
    }
    if (tn < bound) rep.ok = false;
  }
  return rep;
}

void IntervalUnion::add(double lo, double hi) {
  if (hi < lo) return;
  iv_.push_back({lo, hi});
  merged_ = iv_.size() <= 1;
}

void IntervalUnion::merge() {
  if (merged_) return;
  std::sort(iv_.begin(), iv_.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& [lo, hi] : iv_) {
    if (!out.empty() && lo <= out.back().second)
      out.back().second = std::max(out.back().second, hi);
    else
      out.push_back({lo, hi});
  }
  iv_ = std::move(out);
  merged_ = true;
}

double IntervalUnion::total_length() const noexcept {
  double acc = 0;
  for (const auto& [lo, hi] : iv_) acc += hi - lo;
  return acc;
}

bool IntervalUnion::contains(double x) const noexcept {
  auto it = std::upper_bound(iv_.begin(), iv_.end(), std::pair<double, double>{x, kInfinity});
  if (it == iv_.begin()) return false;
  --it;
  return x >= it->first && x <= it->second;
}

namespace {

double exclusion_radius(int m_scale, double beta, double eps, double delta) {
  return 2.0 * std::max(std::exp(-std::pow(static_cast<double>(m_scale), beta)),
                        std::sqrt(eps + delta));
}

}  // namespace

IntervalUnion step0_exclusion(int m_scale, double beta, double eps, double delta,
                              const Frequencies& omega, const DisorderRealization& pot,
                              const std::vector<Site>& resonant_spatial, const Dims& dims) {
  dims.validate();
  const double r = exclusion_radius(m_scale, beta, eps, delta);
  const Box box = Box::cube(dims.total(), m_scale);
  // Identify S ∪ -S through a scratch seed field.
  CoeffField marker;
  {
    std::vector<double> amps(static_cast<std::size_t>(dims.nu), 0.5 / std::max(1, dims.nu));
    marker = CoeffField::initial(dims, box, 1, amps, resonant_spatial);
  }
  IntervalUnion out;
  const std::int64_t cells = box.cardinality();
  for (std::int64_t i = 0; i < cells; ++i) {
    const Site s = box.site_at(i);
    if (marker.is_resonant_site(s)) continue;
    const double now = omega.dot(s.freq(dims));
    const double vj = pot.value(s.spatial(dims));
    // u-row: |theta + n.omega + v_j| <= r ; v-row: |-theta - n.omega + v_j| <= r.
    out.add(-now - vj - r, -now - vj + r);
    out.add(-now + vj - r, -now + vj + r);
  }
  out.merge();
  return out;
}

double step0_bound(int m_scale, double beta, double eps, double delta, const Dims& dims) {
  const double mx = std::max(std::exp(-std::pow(static_cast<double>(m_scale), beta)),
                             std::sqrt(eps + delta));
  return 4.0 * std::pow(2.0 * m_scale + 1.0, dims.total()) * mx;
}

double default_theta_halfwidth(int n_scale, const Frequencies& omega, double eps,
                               const Distribution& dist, const Dims& dims) {
  double sum_omega = 0;
  for (double w : omega.omega) sum_omega += std::abs(w);
  const auto [lo, hi] = spectrum_bounds(eps, dist, dims.d);
  return n_scale * sum_omega + std::max(std::abs(lo), std::abs(hi)) + 1.0;
}

ThetaScan theta_scan(const CoeffField& y, const Frequencies& omega, double eps, double delta,
                     const DisorderRealization& pot, const ThetaScanConfig& cfg) {
  const Dims& dims = y.dims();
  const Box box = Box::cube(dims.total(), cfg.n_scale);
  const ElementaryRegion region(box);
  if (region.cardinality() > cfg.dense_cap_sites)
    throw PreconditionError("theta_scan: region exceeds dense cap");
  const CoeffField yy = y.box().contains(box.lo()) && y.box().contains(box.hi())
                            ? y
                            : y.on_box(box);

  ThetaScan scan;
  scan.cfg = cfg;
  const std::size_t npts = cfg.grid.count();
  scan.theta.resize(npts);
  scan.norm_inv.assign(npts, 0);
  scan.rate.assign(npts, kInfinity);
  scan.bad.assign(npts, 0);
  scan.norm_threshold = 0.5 * std::exp(std::pow(static_cast<double>(cfg.n_scale), cfg.beta));
  const double cutoff = cfg.n_scale / 10.0;
  const bool diagonal_regime = (eps == 0.0 && delta == 0.0);

  // theta enters only the diagonal (+theta on u-rows, -theta on v-rows), so
  // the operator is assembled once at theta = 0 and shifted per grid point.
  const LinearizedOp op0 =
      assemble_T(yy, omega, 0.0, eps, delta, pot, region, PinPolicy::ResonantSites);
  const int nrows = op0.rows();
  std::vector<double> sign(static_cast<std::size_t>(nrows));
  for (int r = 0; r < nrows; ++r)
    sign[static_cast<std::size_t>(r)] = op0.dof(r).block == Block::U ? 1.0 : -1.0;
  Eigen::MatrixXd base;
  if (!diagonal_regime) base = op0.dense();

  parallel_for(npts, cfg.threads, [&](std::size_t i) {
    const double theta = cfg.grid.at(i);
    scan.theta[i] = theta;
    if (diagonal_regime) {
      // T is exactly diagonal: the norm is the reciprocal smallest |entry|
      // and the off-diagonal decay test is vacuous.
      double mind = kInfinity;
      for (int r = 0; r < nrows; ++r)
        mind = std::min(mind,
                        std::abs(op0.d_diag(r) + sign[static_cast<std::size_t>(r)] * theta));
      scan.norm_inv[i] = mind > 0 ? 1.0 / mind : kInfinity;
      scan.bad[i] = scan.norm_inv[i] >= scan.norm_threshold ? 1 : 0;
      return;
    }
    // Leaner path than invert_dense: factor once, power-method norm,
    // decay fit from all or sampled columns.
    Eigen::MatrixXd m = base;
    for (int r = 0; r < nrows; ++r) m(r, r) += sign[static_cast<std::size_t>(r)] * theta;
    DenseInverse di(std::move(m));
    if (di.min_pivot().first < 1e-300) {
      scan.norm_inv[i] = kInfinity;
      scan.bad[i] = 1;
      return;
    }
    const double norm = di.norm_est(cfg.norm_power_iters);
    scan.norm_inv[i] = norm;
    bool bad = norm >= scan.norm_threshold;
    if (!bad && cfg.gamma > 0) {
      const int ncols =
          cfg.decay_sample_columns > 0 ? std::min(cfg.decay_sample_columns, nrows) : nrows;
      std::vector<double> xs, ys;
      for (int ci = 0; ci < ncols; ++ci) {
        const int col = static_cast<int>((static_cast<long>(ci) * nrows) / ncols);
        const Eigen::VectorXd g = di.solve(Eigen::VectorXd::Unit(nrows, col));
        for (int rr = 0; rr < nrows; ++rr) {
          const double dist = static_cast<double>(op0.site_distance(rr, col));
          if (dist <= cutoff) continue;
          const double mag = std::abs(g[rr]);
          if (mag > 1e-300) {
            xs.push_back(dist);
            ys.push_back(-std::log(mag));
          }
        }
      }
      const double rate = xs.empty() ? kInfinity : fit_line(xs, ys).slope;
      scan.rate[i] = rate;
      if (rate < cfg.gamma) bad = true;
    }
    scan.bad[i] = bad ? 1 : 0;
  });

  std::size_t nbad = 0;
  for (std::uint8_t b : scan.bad) nbad += b;
  scan.measure_estimate = static_cast<double>(nbad) * cfg.grid.step;
  return scan;
}

double fit_sigma(const std::vector<int>& n_values, const std::vector<double>& measures) {
  if (n_values.size() != measures.size())
    throw PreconditionError("fit_sigma: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const double m = measures[i];
    if (!(m > 0) || !(m < 1)) continue;
    xs.push_back(std::log(static_cast<double>(n_values[i])));
    ys.push_back(std::log(-std::log(m)));
  }
  if (xs.size() < 2) return 0;
  return fit_line(xs, ys).slope;
}

}  // namespace qpdnls
