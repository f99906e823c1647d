#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qpdnls/disorder.hpp"
#include "qpdnls/field.hpp"
#include "qpdnls/support.hpp"

namespace qpdnls::test {

/// Deterministic RNG for test data.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return state_ = splitmix64(state_); }
  double uniform() { return key_to_unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double sym() { return 2.0 * uniform() - 1.0; }

private:
  std::uint64_t state_;
};

/// Random coefficient pair with exponentially enveloped entries, pinned.
inline CoeffField random_field(Rng& rng, const Dims& dims, int box_radius, int p,
                               double amp, double envelope_rate, bool conjugate_symmetric) {
  std::vector<double> amps(static_cast<std::size_t>(dims.nu));
  std::vector<Site> res;
  for (int k = 0; k < dims.nu; ++k) {
    amps[static_cast<std::size_t>(k)] = amp;
    res.push_back(Site::zero(dims.d));
  }
  const Box box = Box::cube(dims.total(), box_radius);
  CoeffField y = CoeffField::initial(dims, box, p, amps, res);
  const std::int64_t cells = box.cardinality();
  for (std::int64_t i = 0; i < cells; ++i) {
    const Site s = box.site_at(i);
    const double env = std::exp(-envelope_rate * static_cast<double>(s.l1()));
    y.uhat().ref(s) = amp * env * rng.sym();
    y.vhat().ref(s) = amp * env * rng.sym();
  }
  if (conjugate_symmetric) {
    for (std::int64_t i = 0; i < cells; ++i) {
      const Site s = box.site_at(i);
      Site mirror = s;
      for (int a = 0; a < dims.nu; ++a) mirror[a] = -s[a];
      y.vhat().ref(s) = y.uhat().at(mirror);
    }
  }
  y.pin();
  return y;
}

/// Brute-force residual of the first component at one site: nested loops
/// over the p-fold convolution, independent of the NProfile machinery.
/// Supports p = 1 and p = 2.
inline double brute_force_f1(const CoeffField& y, const Frequencies& omega, double eps,
                             double delta, const DisorderRealization& pot, const Site& s) {
  const Dims& dims = y.dims();
  const Site j = s.spatial(dims);
  const Site n = s.freq(dims);
  double acc = (omega.dot(n) + pot.value(j)) * y.uhat().at(s);
  for (int a = 0; a < dims.d; ++a)
    for (int step : {-1, +1}) {
      Site nb = s;
      nb[dims.nu + a] += step;
      acc += eps * y.uhat().at(nb);
    }
  if (delta == 0.0) return acc;
  // Collect the n-range of the box.
  const Box& b = y.box();
  std::vector<Site> nsites;
  {
    std::vector<int> radii(static_cast<std::size_t>(dims.nu));
    for (int i = 0; i < dims.nu; ++i) radii[static_cast<std::size_t>(i)] = b.radius[static_cast<std::size_t>(i)];
    const Box nbox = Box::around(b.center.freq(dims), radii);
    for (std::int64_t i = 0; i < nbox.cardinality(); ++i) nsites.push_back(nbox.site_at(i));
  }
  auto u = [&](const Site& m) { return y.uhat().at(Site::from_jn(j, m)); };
  auto v = [&](const Site& m) { return y.vhat().at(Site::from_jn(j, m)); };
  double nl = 0;
  if (y.p() == 1) {
    for (const Site& a1 : nsites)
      for (const Site& b1 : nsites) {
        Site c = n;
        for (int ax = 0; ax < dims.nu; ++ax) c[ax] = n[ax] - a1[ax] - b1[ax];
        nl += u(a1) * v(b1) * u(c);
      }
  } else if (y.p() == 2) {
    for (const Site& a1 : nsites)
      for (const Site& b1 : nsites)
        for (const Site& a2 : nsites)
          for (const Site& b2 : nsites) {
            Site c = n;
            for (int ax = 0; ax < dims.nu; ++ax)
              c[ax] = n[ax] - a1[ax] - b1[ax] - a2[ax] - b2[ax];
            nl += u(a1) * v(b1) * u(a2) * v(b2) * u(c);
          }
  } else {
    throw PreconditionError("brute_force_f1: p not supported by the oracle");
  }
  return acc + delta * nl;
}

inline DisorderRealization narrow_pot(int d, int radius, double lo, double hi,
                                      std::uint64_t seed) {
  return DisorderRealization::sample(Distribution{lo, hi}, Box::cube(d, radius), seed);
}

}  // namespace qpdnls::test
