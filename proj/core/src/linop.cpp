#include "qpdnls/linop.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qpdnls {

namespace {

Eigen::VectorXd seeded_unit_vector(int n, std::uint64_t seed) {
  Eigen::VectorXd v(n);
  std::uint64_t h = seed;
  for (int i = 0; i < n; ++i) {
    h = splitmix64(h);
    v[i] = 2.0 * key_to_unit(h) - 1.0;
  }
  const double norm = v.norm();
  return norm > 0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Unit(n, 0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Assembly

LinearizedOp assemble_T(const CoeffField& y, const Frequencies& omega, double theta,
                        double eps, double delta, const DisorderRealization& pot,
                        const ElementaryRegion& region, PinPolicy pin) {
  const Dims& dims = y.dims();
  if (region.axes() != dims.total())
    throw PreconditionError("assemble_T: region axes mismatch");
  if (omega.nu() != dims.nu) throw PreconditionError("assemble_T: omega dimension mismatch");
  if (!y.box().contains(region.base().lo()) || !y.box().contains(region.base().hi()))
    throw PreconditionError("assemble_T: convolution cone escapes y's box");

  LinearizedOp op;
  op.dims_ = dims;
  op.region_ = region;
  op.theta_ = theta;
  op.eps_ = eps;
  op.delta_ = delta;

  const std::vector<Site> sites = region.enumerate();
  for (const Site& s : sites)
    if (!pot.covers(s.spatial(dims)))
      throw PreconditionError("assemble_T: region escapes potential box");

  auto include = [&](Block b, const Site& s) {
    switch (pin) {
      case PinPolicy::None:
        return true;
      case PinPolicy::PinnedEntries:
        return b == Block::U ? !y.is_pinned_u(s) : !y.is_pinned_v(s);
      case PinPolicy::ResonantSites:
        return !y.is_resonant_site(s);
    }
    return true;
  };

  op.dofs_.reserve(2 * sites.size());
  for (const Site& s : sites)
    if (include(Block::U, s)) {
      op.urow_.emplace(s, static_cast<int>(op.dofs_.size()));
      op.dofs_.push_back({Block::U, s});
    }
  for (const Site& s : sites)
    if (include(Block::V, s)) {
      op.vrow_.emplace(s, static_cast<int>(op.dofs_.size()));
      op.dofs_.push_back({Block::V, s});
    }

  op.diag_.resize(op.dofs_.size());
  for (std::size_t r = 0; r < op.dofs_.size(); ++r) {
    const Dof& d = op.dofs_[r];
    const double now = omega.dot(d.site.freq(dims)) + theta;
    const double vj = pot.value(d.site.spatial(dims));
    op.diag_[r] = (d.block == Block::U ? now : -now) + vj;
  }

  if (delta != 0.0) {
    for (const Site& s : sites) {
      const Site j = s.spatial(dims);
      if (!op.kernels_.contains(j)) op.kernels_.emplace(j, build_s_kernels(y, j));
    }
  }
  return op;
}

int LinearizedOp::find_dof(Block b, const Site& s) const noexcept {
  const auto& map = (b == Block::U) ? urow_ : vrow_;
  auto it = map.find(s);
  return it == map.end() ? -1 : it->second;
}

void LinearizedOp::row_entries(int row, const std::function<void(int, double)>& emit) const {
  const Dof& d = dofs_[static_cast<std::size_t>(row)];
  emit(row, diag_[static_cast<std::size_t>(row)]);
  if (eps_ != 0.0) {
    for (int a = 0; a < dims_.d; ++a) {
      for (int step : {-1, +1}) {
        Site nb = d.site;
        nb[dims_.nu + a] += step;
        const int col = find_dof(d.block, nb);
        if (col >= 0) emit(col, eps_);
      }
    }
  }
  if (delta_ != 0.0) {
    const Site j = d.site.spatial(dims_);
    const auto it = kernels_.find(j);
    if (it == kernels_.end()) return;
    const SKernels& k = it->second;
    const Site n = d.site.freq(dims_);
    auto emit_kernel = [&](const NProfile& kern, Block target) {
      const std::int64_t cells = kern.cells();
      for (std::int64_t c = 0; c < cells; ++c) {
        const Site m = kern.site_at(c);
        const double val = kern.at(m);
        if (val == 0.0) continue;
        // row n couples to column n' = n - m
        Site col_site = d.site;
        for (int a = 0; a < dims_.nu; ++a) col_site[a] = n[a] - m[a];
        const int col = find_dof(target, col_site);
        if (col >= 0) emit(col, delta_ * val);
      }
    };
    if (d.block == Block::U) {
      emit_kernel(k.k11, Block::U);
      emit_kernel(k.k12, Block::V);
    } else {
      emit_kernel(k.k21, Block::U);
      emit_kernel(k.k11, Block::V);
    }
  }
}

double LinearizedOp::entry(int row, int col) const {
  double acc = 0;
  row_entries(row, [&](int c, double v) {
    if (c == col) acc += v;
  });
  return acc;
}

Eigen::MatrixXd LinearizedOp::dense() const {
  const int n = rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r)
    row_entries(r, [&](int c, double v) { m(r, c) += v; });
  return m;
}

Eigen::VectorXd LinearizedOp::apply(const Eigen::VectorXd& x) const {
  const int n = rows();
  if (x.size() != n) throw PreconditionError("LinearizedOp::apply: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < n; ++r) {
    double acc = 0;
    row_entries(r, [&](int c, double v) { acc += v * x[c]; });
    out[r] = acc;
  }
  return out;
}

long LinearizedOp::site_distance(int a, int b) const {
  return l1_distance(dofs_[static_cast<std::size_t>(a)].site,
                     dofs_[static_cast<std::size_t>(b)].site);
}

// ---------------------------------------------------------------------------
// Dense inversion

DenseInverse::DenseInverse(Eigen::MatrixXd m) : lu_(std::move(m)) {}

const Eigen::MatrixXd& DenseInverse::matrix() const {
  if (!inv_) inv_ = std::make_shared<Eigen::MatrixXd>(lu_.inverse());
  return *inv_;
}

std::pair<double, int> DenseInverse::min_pivot() const {
  const auto diag = lu_.matrixLU().diagonal();
  double best = kInfinity;
  int at = -1;
  for (int i = 0; i < diag.size(); ++i) {
    const double a = std::abs(diag[i]);
    if (a < best) {
      best = a;
      at = i;
    }
  }
  return {best, at};
}

double DenseInverse::norm_est(int iters) const {
  const int n = rows();
  if (n == 0) return 0;
  Eigen::VectorXd x = seeded_unit_vector(n, 0x5eedULL);
  double lambda = 0;
  for (int i = 0; i < iters; ++i) {
    Eigen::VectorXd y = lu_.solve(x);
    y = lu_.transpose().solve(y);
    lambda = y.norm();
    if (lambda == 0 || !std::isfinite(lambda)) break;
    x = y / lambda;
  }
  return std::isfinite(lambda) ? std::sqrt(lambda) : kInfinity;
}

std::vector<long> dof_pair_distances(const LinearizedOp& op) {
  const int n = op.rows();
  std::vector<long> d(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      d[static_cast<std::size_t>(r) * n + c] = op.site_distance(r, c);
  return d;
}

MatrixDecayFit fit_matrix_decay(const Eigen::MatrixXd& g, const std::vector<long>& pair_dist,
                                double cutoff) {
  MatrixDecayFit out;
  const int n = static_cast<int>(g.rows());
  std::vector<double> x, yv;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double dist = static_cast<double>(pair_dist[static_cast<std::size_t>(r) * n + c]);
      if (dist <= cutoff) continue;
      const double mag = std::abs(g(r, c));
      out.max_entry_beyond = std::max(out.max_entry_beyond, mag);
      if (mag > 1e-300) {
        x.push_back(dist);
        yv.push_back(-std::log(mag));
      }
    }
  }
  if (!x.empty()) out.rate = fit_line(x, yv).slope;
  return out;
}

DenseInvertOutcome invert_dense(const LinearizedOp& op, int dense_cap_sites) {
  if (op.region().cardinality() > dense_cap_sites)
    throw PreconditionError("invert_dense: region cardinality exceeds dense cap");
  DenseInvertOutcome out;
  out.inverse = DenseInverse(op.dense());
  const auto [pivot, at] = out.inverse.min_pivot();
  if (pivot < 1e-300) {
    out.status = InvertStatus::Singular;
    out.singular_index = at;
    out.singular_pivot = pivot;
    return out;
  }
  out.report.norm_inv = out.inverse.norm_est();
  const double rc = out.inverse.rcond();
  out.report.condition = rc > 0 ? 1.0 / rc : kInfinity;
  const MatrixDecayFit fit =
      fit_matrix_decay(out.inverse.matrix(), dof_pair_distances(op), op.region().diameter() / 10.0);
  out.report.offdiag_rate = fit.rate;
  out.report.max_entry_beyond = fit.max_entry_beyond;
  return out;
}

GreenDecayOutcome green_decay(const LinearizedOp& op, int dense_cap_sites) {
  GreenDecayOutcome out;
  DenseInvertOutcome inv = invert_dense(op, dense_cap_sites);
  out.status = inv.status;
  if (inv.status == InvertStatus::Ok) out.report = inv.report;
  return out;
}

// ---------------------------------------------------------------------------
// Covering inversion (resolvent identity)

namespace {

// l1 distance from a site of W to the interior boundary of W relative to
// `ambient`, computed from box geometry: a face of W contributes only when
// it is strictly interior to the ambient box. Infinite when W has no
// interior boundary (W == ambient).
double margin_to_interior_boundary(const Site& s, const Box& w, const Box& ambient) {
  double best = kInfinity;
  for (int a = 0; a < w.axes(); ++a) {
    const int w_lo = w.center[a] - w.radius[static_cast<std::size_t>(a)];
    const int w_hi = w.center[a] + w.radius[static_cast<std::size_t>(a)];
    const int amb_lo = ambient.center[a] - ambient.radius[static_cast<std::size_t>(a)];
    const int amb_hi = ambient.center[a] + ambient.radius[static_cast<std::size_t>(a)];
    if (w_lo > amb_lo) best = std::min(best, static_cast<double>(s[a] - w_lo));
    if (w_hi < amb_hi) best = std::min(best, static_cast<double>(w_hi - s[a]));
  }
  return best;
}

}  // namespace

struct CoveringBuilder {
  static CoveringOutcome build(const LinearizedOp& op, const ElementaryRegion& inner,
                               const std::vector<ElementaryRegion>& patch_regions,
                               const CoveringOptions& opts) {
    CoveringOutcome out;
    CoveringInverse& cov = out.inverse;
    cov.op_ = &op;
    cov.rows_ = op.rows();
    cov.opts_ = opts;

    const Box& ambient = op.region().base();
    std::vector<const ElementaryRegion*> regions;
    regions.push_back(&inner);
    for (const auto& p : patch_regions) regions.push_back(&p);

    // Row sets per patch.
    cov.patches_.resize(regions.size());
    for (std::size_t pi = 0; pi < regions.size(); ++pi) {
      auto& pd = cov.patches_[pi];
      for (int r = 0; r < op.rows(); ++r) {
        if (regions[pi]->contains(op.dof(r).site)) {
          pd.local.emplace(r, static_cast<int>(pd.rows.size()));
          pd.rows.push_back(r);
        }
      }
    }

    // W(k) assignment: the inner box when the site sits deep inside it,
    // otherwise the patch with the largest interior-boundary margin.
    const int inner_half = inner.base().radius[0] / 2;
    cov.assign_.assign(static_cast<std::size_t>(op.rows()), -1);
    for (int r = 0; r < op.rows(); ++r) {
      const Site& s = op.dof(r).site;
      int choice = -1;
      double margin = -1;
      if (s.linf() <= inner_half && inner.contains(s)) {
        const double m = margin_to_interior_boundary(s, inner.base(), ambient);
        if (m >= opts.m0) {
          choice = 0;
          margin = m;
        }
      }
      if (choice < 0) {
        for (std::size_t pi = 0; pi < regions.size(); ++pi) {
          if (!regions[pi]->contains(s)) continue;
          const double m = margin_to_interior_boundary(s, regions[pi]->base(), ambient);
          if (m >= opts.m0 && m > margin) {
            choice = static_cast<int>(pi);
            margin = m;
          }
        }
      }
      if (choice < 0) {
        out.status = InvertStatus::PatchMissing;
        out.missing_site = s;
        return out;
      }
      cov.assign_[static_cast<std::size_t>(r)] = choice;
    }

    // Factorize each patch's restriction and collect its outside couplings.
    for (auto& pd : cov.patches_) {
      const int m = static_cast<int>(pd.rows.size());
      pd.couplings.assign(static_cast<std::size_t>(m), {});
      pd.out_abs_row_sum = Eigen::VectorXd::Zero(m);
      if (m == 0) continue;
      Eigen::MatrixXd sub = Eigen::MatrixXd::Zero(m, m);
      for (int lr = 0; lr < m; ++lr) {
        const int gr = pd.rows[static_cast<std::size_t>(lr)];
        op.row_entries(gr, [&](int gc, double v) {
          auto it = pd.local.find(gc);
          if (it != pd.local.end()) {
            sub(lr, it->second) += v;
          } else {
            pd.couplings[static_cast<std::size_t>(lr)].push_back({gc, v});
            pd.out_abs_row_sum[lr] += std::abs(v);
          }
        });
      }
      pd.inv = DenseInverse(std::move(sub));
      if (pd.inv.min_pivot().first < 1e-300) {
        out.status = InvertStatus::Singular;
        return out;
      }
    }

    // Contraction bound: max_k sum_{k' in W(k)} |G_W(k,k')| * out_row_sum(k').
    double kappa = 0;
    for (int r = 0; r < op.rows(); ++r) {
      const auto& pd = cov.patches_[static_cast<std::size_t>(cov.assign_[static_cast<std::size_t>(r)])];
      const int lr = pd.local.at(r);
      const Eigen::MatrixXd& g = pd.inv.matrix();
      kappa = std::max(kappa, g.row(lr).cwiseAbs().dot(pd.out_abs_row_sum));
    }
    out.contraction = kappa;
    cov.contraction_ = kappa;
    if (!(kappa < 0.5)) {
      out.status = InvertStatus::NoContraction;
      return out;
    }
    return out;
  }
};

Eigen::VectorXd CoveringInverse::solve(const Eigen::VectorXd& f) const {
  const int n = rows_;
  if (f.size() != n) throw PreconditionError("CoveringInverse::solve: size mismatch");
  // Per-patch inverse applied to the restriction of f.
  std::vector<Eigen::VectorXd> base(patches_.size());
  for (std::size_t pi = 0; pi < patches_.size(); ++pi) {
    const auto& pd = patches_[pi];
    Eigen::VectorXd fw(pd.rows.size());
    for (std::size_t i = 0; i < pd.rows.size(); ++i) fw[static_cast<Eigen::Index>(i)] = f[pd.rows[i]];
    base[pi] = pd.rows.empty() ? Eigen::VectorXd() : pd.inv.solve(fw);
  }
  Eigen::VectorXd b(n);
  for (int r = 0; r < n; ++r) {
    const auto& pd = patches_[static_cast<std::size_t>(assign_[static_cast<std::size_t>(r)])];
    b[r] = base[static_cast<std::size_t>(assign_[static_cast<std::size_t>(r)])][pd.local.at(r)];
  }

  Eigen::VectorXd x = b;
  const double bnorm = std::max(b.norm(), 1e-300);
  int it = 0;
  for (; it < opts_.max_iter; ++it) {
    // y = K x per patch: c_W = T_{W,out} x, then G_W c_W.
    Eigen::VectorXd xn = b;
    for (std::size_t pi = 0; pi < patches_.size(); ++pi) {
      const auto& pd = patches_[pi];
      if (pd.rows.empty()) continue;
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pd.rows.size()));
      bool any = false;
      for (std::size_t lr = 0; lr < pd.rows.size(); ++lr) {
        double acc = 0;
        for (const auto& [gc, v] : pd.couplings[lr]) acc += v * x[gc];
        if (acc != 0) any = true;
        c[static_cast<Eigen::Index>(lr)] = acc;
      }
      if (!any) continue;
      const Eigen::VectorXd g = pd.inv.solve(c);
      for (std::size_t lr = 0; lr < pd.rows.size(); ++lr) {
        const int gr = pd.rows[lr];
        if (assign_[static_cast<std::size_t>(gr)] == static_cast<int>(pi))
          xn[gr] -= g[static_cast<Eigen::Index>(lr)];
      }
    }
    const double diff = (xn - x).norm();
    x = xn;
    if (diff <= opts_.tol * bnorm) break;
  }
  last_iters_ = it + 1;
  return x;
}

CoveringOutcome invert_covering(const LinearizedOp& op, const ElementaryRegion& inner,
                                const std::vector<ElementaryRegion>& patch_regions,
                                const CoveringOptions& opts) {
  CoveringOutcome out = CoveringBuilder::build(op, inner, patch_regions, opts);
  if (out.status != InvertStatus::Ok) return out;

  // Report: power-method norm through the covering solve (T is symmetric
  // here, so T^{-T} = T^{-1}), decay fit from sampled columns.
  const int n = op.rows();
  Eigen::VectorXd x = seeded_unit_vector(n, 0xc0feULL);
  double lambda = 0;
  for (int i = 0; i < opts.norm_power_iters; ++i) {
    Eigen::VectorXd y = out.inverse.solve(out.inverse.solve(x));
    lambda = y.norm();
    if (lambda == 0 || !std::isfinite(lambda)) break;
    x = y / lambda;
  }
  out.report.norm_inv = std::isfinite(lambda) ? std::sqrt(lambda) : kInfinity;
  out.report.condition = 0;  // not estimated for the covering strategy

  const int ncols = std::min(n, opts.decay_sample_columns);
  if (ncols > 0) {
    std::vector<double> xs, ys;
    double maxbeyond = 0;
    const double cutoff = op.region().diameter() / 10.0;
    for (int ci = 0; ci < ncols; ++ci) {
      const int col = static_cast<int>((static_cast<long>(ci) * n) / ncols);
      const Eigen::VectorXd g = out.inverse.solve(Eigen::VectorXd::Unit(n, col));
      for (int r = 0; r < n; ++r) {
        const double dist = static_cast<double>(op.site_distance(r, col));
        if (dist <= cutoff) continue;
        const double mag = std::abs(g[r]);
        maxbeyond = std::max(maxbeyond, mag);
        if (mag > 1e-300) {
          xs.push_back(dist);
          ys.push_back(-std::log(mag));
        }
      }
    }
    out.report.offdiag_rate = xs.empty() ? kInfinity : fit_line(xs, ys).slope;
    out.report.max_entry_beyond = maxbeyond;
  }
  return out;
}

std::vector<ElementaryRegion> default_covering_patches(const ElementaryRegion& outer,
                                                       const ElementaryRegion& inner, int m0) {
  const Box& big = outer.base();
  const int axes = big.axes();
  std::vector<ElementaryRegion> patches;
  // Patch centers on a sub-lattice of spacing m0 so neighboring patches
  // overlap; clamp each patch box into the outer box.
  const int inner_half = inner.base().radius[0] / 2;
  std::vector<Site> centers;
  std::vector<int> idx(static_cast<std::size_t>(axes), 0);
  std::vector<std::pair<int, int>> ranges;
  for (int a = 0; a < axes; ++a) {
    const int lo = big.center[a] - big.radius[static_cast<std::size_t>(a)];
    const int hi = big.center[a] + big.radius[static_cast<std::size_t>(a)];
    ranges.push_back({lo, hi});
  }
  std::function<void(int, Site&)> rec = [&](int a, Site& c) {
    if (a == axes) {
      if (c.linf() > inner_half) centers.push_back(c);
      return;
    }
    for (int v = ranges[static_cast<std::size_t>(a)].first;
         v <= ranges[static_cast<std::size_t>(a)].second; v += std::max(1, m0)) {
      c[a] = v;
      rec(a + 1, c);
    }
    c[a] = ranges[static_cast<std::size_t>(a)].second;
    rec(a + 1, c);
  };
  Site c = Site::zero(axes);
  rec(0, c);
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  for (const Site& ctr : centers) {
    // Clamp: intersect [ctr - 2 m0, ctr + 2 m0] with the outer box.
    Site lo = ctr, hi = ctr, cc = ctr;
    std::vector<int> radii(static_cast<std::size_t>(axes));
    for (int a = 0; a < axes; ++a) {
      const int blo = ranges[static_cast<std::size_t>(a)].first;
      const int bhi = ranges[static_cast<std::size_t>(a)].second;
      int l = std::max(ctr[a] - 2 * m0, blo);
      int h = std::min(ctr[a] + 2 * m0, bhi);
      // Keep the full width when clamped against a wall.
      if (h - l < 4 * m0) {
        if (l == blo) h = std::min(l + 4 * m0, bhi);
        if (h == bhi) l = std::max(h - 4 * m0, blo);
      }
      cc[a] = (l + h) / 2;
      radii[static_cast<std::size_t>(a)] = (h - l) / 2;
      lo[a] = l;
      hi[a] = h;
    }
    patches.push_back(ElementaryRegion(Box::around(cc, radii)));
  }
  return patches;
}

// ---------------------------------------------------------------------------
// Schur reduction

SchurOutcome schur_reduce(const LinearizedOp& op, const std::vector<Site>& bad_sites,
                          int dense_cap_sites) {
  if (op.region().cardinality() > dense_cap_sites)
    throw PreconditionError("schur_reduce: region cardinality exceeds dense cap");
  SchurOutcome out;
  std::unordered_map<Site, char, SiteHash> bad;
  for (const Site& s : bad_sites) bad.emplace(s, 1);
  for (int r = 0; r < op.rows(); ++r) {
    if (bad.contains(op.dof(r).site))
      out.bad_rows.push_back(r);
    else
      out.good_rows.push_back(r);
  }
  const Eigen::MatrixXd t = op.dense();
  const auto seg = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Eigen::MatrixXd m(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            t(rows[i], cols[j]);
    return m;
  };
  const Eigen::MatrixXd tcc = seg(out.bad_rows, out.bad_rows);
  if (out.good_rows.empty()) {
    out.a = tcc;
    return out;
  }
  DenseInverse ginv(seg(out.good_rows, out.good_rows));
  if (ginv.min_pivot().first < 1e-300) {
    out.status = InvertStatus::Singular;
    return out;
  }
  const Eigen::MatrixXd tcg = seg(out.bad_rows, out.good_rows);
  const Eigen::MatrixXd tgc = seg(out.good_rows, out.bad_rows);
  out.a = tcc - tcg * ginv.solve_many(tgc);

  out.good_report.norm_inv = ginv.norm_est();
  const double rc = ginv.rcond();
  out.good_report.condition = rc > 0 ? 1.0 / rc : kInfinity;
  // Decay fit of the good-block inverse against site distances.
  {
    const int m = static_cast<int>(out.good_rows.size());
    std::vector<long> dist(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        dist[static_cast<std::size_t>(i) * m + j] =
            op.site_distance(out.good_rows[static_cast<std::size_t>(i)],
                             out.good_rows[static_cast<std::size_t>(j)]);
    const MatrixDecayFit fit =
        fit_matrix_decay(ginv.matrix(), dist, op.region().diameter() / 10.0);
    out.good_report.offdiag_rate = fit.rate;
    out.good_report.max_entry_beyond = fit.max_entry_beyond;
  }
  out.good_inverse = std::move(ginv);
  return out;
}

std::string dump_coordinates(const LinearizedOp& op) {
  std::ostringstream out;
  out << "# row-site col-site value\n";
  for (int r = 0; r < op.rows(); ++r) {
    std::unordered_map<int, double> row;
    op.row_entries(r, [&](int c, double v) { row[c] += v; });
    std::vector<int> cols;
    cols.reserve(row.size());
    for (const auto& [c, v] : row) cols.push_back(c);
    std::sort(cols.begin(), cols.end());
    for (int c : cols) {
      const double v = row[c];
      if (v == 0.0) continue;
      const Dof& dr = op.dof(r);
      const Dof& dc = op.dof(c);
      out << (dr.block == Block::U ? "u" : "v") << dr.site.str() << " "
          << (dc.block == Block::U ? "u" : "v") << dc.site.str() << " " << format_full(v)
          << "\n";
    }
  }
  return out.str();
}

}  // namespace qpdnls
