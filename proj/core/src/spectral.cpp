#include "qpdnls/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace qpdnls {

EigenData eig_region(double eps, const DisorderRealization& pot,
                     const ElementaryRegion& region, int dense_eig_cap) {
  if (region.cardinality() > dense_eig_cap)
    throw PreconditionError("eig_region: region cardinality exceeds dense eig cap");
  const SpatialOperator h = assemble_H(eps, pot, region);
  EigenData ed;
  ed.region = region;
  ed.index = h.index;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix());
  ed.mu = es.eigenvalues();
  ed.psi = es.eigenvectors();
  const int n = ed.index.size();
  ed.centers.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    int best = 0;
    double mag = -1;
    for (int r = 0; r < n; ++r) {
      const double a = std::abs(ed.psi(r, c));
      if (a > mag) {
        mag = a;
        best = r;
      }
    }
    ed.centers.push_back(ed.index[best]);
  }
  return ed;
}

double EigenData::max_eigen_residual(double eps, const DisorderRealization& pot) const {
  const SpatialOperator h{region, eps, &pot, index};
  const Eigen::MatrixXd hm = h.matrix();
  double worst = 0;
  for (int c = 0; c < mu.size(); ++c) {
    const double r = (hm * psi.col(c) - mu[c] * psi.col(c)).norm() / std::max(std::abs(mu[c]), 1.0);
    worst = std::max(worst, r);
  }
  return worst;
}

double EigenData::max_orthonormality_defect() const {
  const Eigen::MatrixXd g = psi.transpose() * psi;
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

std::vector<double> eigenvector_decay_rates(const EigenData& ed) {
  std::vector<double> rates;
  const int n = ed.index.size();
  rates.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    std::vector<double> xs, ys;
    for (int r = 0; r < n; ++r) {
      const long dist = l1_distance(ed.index[r], ed.centers[static_cast<std::size_t>(c)]);
      if (dist < 1) continue;
      const double mag = std::abs(ed.psi(r, c));
      if (mag <= 1e-300) continue;
      xs.push_back(static_cast<double>(dist));
      ys.push_back(-std::log(mag));
    }
    rates.push_back(xs.empty() ? kInfinity : fit_line(xs, ys).slope);
  }
  return rates;
}

Eigen::MatrixXd green_function(double eps, const DisorderRealization& pot,
                               const EigenData& ed, double e_energy) {
  double mindist = kInfinity;
  for (int i = 0; i < ed.mu.size(); ++i) mindist = std::min(mindist, std::abs(ed.mu[i] - e_energy));
  if (mindist <= 1e-12)
    throw NotResolventError("green_function: energy within 1e-12 of the restricted spectrum");
  const SpatialOperator h{ed.region, eps, &pot, ed.index};
  Eigen::MatrixXd a = h.matrix();
  const int n = static_cast<int>(a.rows());
  for (int i = 0; i < n; ++i) a(i, i) -= e_energy;
  Eigen::MatrixXd g = a.partialPivLu().inverse();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < r; ++c) {
      const double sym = 0.5 * (g(r, c) + g(c, r));
      g(r, c) = sym;
      g(c, r) = sym;
    }
  return g;
}

RegularityReport check_regular(double eps, const DisorderRealization& pot,
                               const ElementaryRegion& region, double e_energy, double m,
                               int dense_eig_cap) {
  const EigenData ed = eig_region(eps, pot, region, dense_eig_cap);
  const Eigen::MatrixXd g = green_function(eps, pot, ed, e_energy);
  const SpatialOperator h{region, eps, &pot, ed.index};
  const int n = h.index.size();

  const int l_scale = region.diameter() / 2;
  const double cutoff = l_scale / 4.0;

  std::vector<int> row_set;
  if (l_scale <= 30) {
    row_set.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) row_set[static_cast<std::size_t>(i)] = i;
  } else {
    for (int i = 0; i < n; ++i) {
      const Site& s = h.index[i];
      bool ring = false;
      for (int ax = 0; ax < s.axes() && !ring; ++ax)
        for (int step : {-1, +1}) {
          Site nb = s;
          nb[ax] += step;
          if (!region.contains(nb)) {
            ring = true;
            break;
          }
        }
      if (ring) row_set.push_back(i);
    }
  }

  RegularityReport rep;
  rep.e = e_energy;
  rep.m = m;
  rep.regular = true;
  double worst_excess = -kInfinity;
  for (int i : row_set) {
    for (int jp = 0; jp < n; ++jp) {
      const long dist = l1_distance(h.index[i], h.index[jp]);
      if (static_cast<double>(dist) <= cutoff) continue;
      const double mag = std::abs(g(i, jp));
      const double bound = std::exp(-m * static_cast<double>(dist));
      const double excess = mag - bound;
      if (excess > worst_excess) {
        worst_excess = excess;
        rep.worst_j = h.index[i];
        rep.worst_jp = h.index[jp];
        rep.worst_g = mag;
        rep.worst_bound = bound;
      }
      if (mag > bound) rep.regular = false;
    }
  }
  return rep;
}

SeparationStat separation_stat(double eps, const DisorderRealization& pot,
                               const std::vector<std::pair<ElementaryRegion, ElementaryRegion>>& pairs,
                               double beta, int dense_eig_cap) {
  SeparationStat out;
  int violations = 0;
  for (const auto& [ra, rb] : pairs) {
    for (const Site& s : ra.enumerate())
      if (rb.contains(s)) throw PreconditionError("separation_stat: regions not disjoint");
    const EigenData ea = eig_region(eps, pot, ra, dense_eig_cap);
    const EigenData eb = eig_region(eps, pot, rb, dense_eig_cap);
    SeparationRow row;
    row.min_gap = kInfinity;
    for (int i = 0; i < ea.mu.size(); ++i)
      for (int j = 0; j < eb.mu.size(); ++j)
        row.min_gap = std::min(row.min_gap, std::abs(ea.mu[i] - eb.mu[j]));
    const int l_scale = std::max(ra.diameter(), rb.diameter()) / 2;
    row.threshold = std::exp(-std::pow(static_cast<double>(std::max(l_scale, 1)), beta));
    row.violates = row.min_gap <= row.threshold;
    if (row.violates) ++violations;
    out.rows.push_back(row);
  }
  out.violation_fraction = pairs.empty() ? 0.0 : static_cast<double>(violations) /
                                                     static_cast<double>(pairs.size());
  return out;
}

WegnerTable wegner_stat(double eps, const Distribution& dist, const ElementaryRegion& s_region,
                        double e_energy, const std::vector<double>& kappas, int trials,
                        std::uint64_t seed, int threads) {
  if (trials < 100) throw PreconditionError("wegner_stat: trials >= 100 required");
  WegnerTable out;
  out.kappa = kappas;
  out.trials = trials;
  std::vector<double> dists(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const DisorderRealization pot =
        DisorderRealization::sample(dist, s_region.base(), splitmix64(seed + t));
    const EigenData ed = eig_region(eps, pot, s_region);
    double d = kInfinity;
    for (int i = 0; i < ed.mu.size(); ++i) d = std::min(d, std::abs(ed.mu[i] - e_energy));
    dists[t] = d;
  });
  out.prob.resize(kappas.size());
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    int count = 0;
    for (double d : dists)
      if (d <= kappas[k]) ++count;
    out.prob[k] = static_cast<double>(count) / static_cast<double>(trials);
  }
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    sxx += kappas[k] * kappas[k];
    sxy += kappas[k] * out.prob[k];
  }
  out.slope = sxx > 0 ? sxy / sxx : 0;
  out.slope_reference =
      static_cast<double>(s_region.cardinality()) * dist.density_sup();
  return out;
}

SeparationDiagnostic separation_1_17(double eps, const DisorderRealization& pot,
                                     const Frequencies& omega, const ElementaryRegion& region,
                                     double chi_rate, const Dims& dims, int dense_eig_cap) {
  // Spatial eigenproblem on the projection of the region.
  std::vector<int> jradii(static_cast<std::size_t>(dims.d));
  for (int i = 0; i < dims.d; ++i)
    jradii[static_cast<std::size_t>(i)] =
        region.base().radius[static_cast<std::size_t>(dims.nu + i)];
  const ElementaryRegion jregion(
      Box::around(region.base().center.spatial(dims), jradii));
  const EigenData ed = eig_region(eps, pot, jregion, dense_eig_cap);
  const int nc = ed.index.size();

  // chi-weighted overlaps K(c, c').
  Eigen::VectorXd chi(nc);
  for (int r = 0; r < nc; ++r)
    chi[r] = std::exp(-chi_rate * static_cast<double>(ed.index[r].l1()));
  const Eigen::MatrixXd k_overlap = ed.psi.transpose() * chi.asDiagonal() * ed.psi;

  // Frequency range of the region.
  std::vector<int> nradii(static_cast<std::size_t>(dims.nu));
  for (int i = 0; i < dims.nu; ++i)
    nradii[static_cast<std::size_t>(i)] = region.base().radius[static_cast<std::size_t>(i)];
  const Box nbox = Box::around(region.base().center.freq(dims), nradii);
  const std::int64_t nn = nbox.cardinality();

  std::vector<std::pair<long, double>> samples;  // (distance, ratio)
  for (std::int64_t ni = 0; ni < nn; ++ni) {
    const Site n1 = nbox.site_at(ni);
    for (std::int64_t nj = 0; nj < nn; ++nj) {
      const Site n2 = nbox.site_at(nj);
      for (int c1 = 0; c1 < nc; ++c1) {
        for (int c2 = 0; c2 < nc; ++c2) {
          if (c1 == c2 && ni == nj) continue;
          const double lam1 = omega.dot(n1) + ed.mu[c1];
          const double lam2 = omega.dot(n2) + ed.mu[c2];
          const double k = std::abs(k_overlap(c1, c2));
          const double gap = std::abs(lam1 - lam2);
          const double ratio = k > 1e-300 ? gap / k : kInfinity;
          const long dist = l1_distance(n1, n2) +
                            l1_distance(ed.centers[static_cast<std::size_t>(c1)],
                                        ed.centers[static_cast<std::size_t>(c2)]);
          samples.push_back({dist, ratio});
        }
      }
    }
  }

  SeparationDiagnostic out;
  out.chi_rate = chi_rate;
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    while (j < samples.size() && samples[j].first == samples[i].first) ++j;
    std::vector<double> ratios;
    ratios.reserve(j - i);
    for (std::size_t t = i; t < j; ++t) ratios.push_back(samples[t].second);
    std::sort(ratios.begin(), ratios.end());
    SeparationBand band;
    band.dist = samples[i].first;
    band.count = static_cast<int>(ratios.size());
    band.median_ratio = ratios[ratios.size() / 2];
    band.min_ratio = ratios.front();
    out.bands.push_back(band);
    i = j;
  }
  for (std::size_t b = out.bands.size(); b-- > 0;) {
    if (out.bands[b].median_ratio >= 10.0)
      out.cutoff_dist = out.bands[b].dist;
    else
      break;
  }
  return out;
}

}  // namespace qpdnls
