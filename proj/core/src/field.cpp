#include "qpdnls/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qpdnls {

namespace {

Site unit_freq_site(int nu, int k, int sign) {
  Site e = Site::zero(nu);
  e[k] = sign;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// NProfile

NProfile::NProfile(const Site& lo, std::span<const int> extents) : lo_(lo) {
  if (static_cast<int>(extents.size()) != lo.axes())
    throw PreconditionError("NProfile: extent/axis mismatch");
  std::int64_t cells = 1;
  for (int i = 0; i < lo.axes(); ++i) {
    if (extents[static_cast<std::size_t>(i)] <= 0)
      throw PreconditionError("NProfile: nonpositive extent");
    ext_[static_cast<std::size_t>(i)] = extents[static_cast<std::size_t>(i)];
    cells *= extents[static_cast<std::size_t>(i)];
  }
  a_.assign(static_cast<std::size_t>(cells), 0.0);
}

NProfile NProfile::delta(const Site& n, double value) {
  std::vector<int> ones(static_cast<std::size_t>(n.axes()), 1);
  NProfile p(n, ones);
  p.a_[0] = value;
  return p;
}

NProfile NProfile::zero_like_point(int axes) { return delta(Site::zero(axes), 0.0); }

bool NProfile::covers(const Site& n) const noexcept {
  if (n.axes() != lo_.axes()) return false;
  for (int i = 0; i < lo_.axes(); ++i) {
    const int off = n[i] - lo_[i];
    if (off < 0 || off >= ext_[static_cast<std::size_t>(i)]) return false;
  }
  return true;
}

double NProfile::at(const Site& n) const noexcept {
  if (!covers(n)) return 0.0;
  std::int64_t idx = 0;
  for (int i = 0; i < lo_.axes(); ++i)
    idx = idx * ext_[static_cast<std::size_t>(i)] + (n[i] - lo_[i]);
  return a_[static_cast<std::size_t>(idx)];
}

double& NProfile::ref(const Site& n) {
  if (!covers(n)) throw PreconditionError("NProfile::ref: outside support box");
  std::int64_t idx = 0;
  for (int i = 0; i < lo_.axes(); ++i)
    idx = idx * ext_[static_cast<std::size_t>(i)] + (n[i] - lo_[i]);
  return a_[static_cast<std::size_t>(idx)];
}

Site NProfile::site_at(std::int64_t flat) const {
  Site s = lo_;
  for (int i = lo_.axes() - 1; i >= 0; --i) {
    const int w = ext_[static_cast<std::size_t>(i)];
    s[i] = lo_[i] + static_cast<int>(flat % w);
    flat /= w;
  }
  return s;
}

double NProfile::max_abs() const noexcept {
  double m = 0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

NProfile NProfile::conv(const NProfile& o) const {
  if (axes() != o.axes()) throw PreconditionError("NProfile::conv: axis mismatch");
  std::vector<int> ext(static_cast<std::size_t>(axes()));
  for (int i = 0; i < axes(); ++i)
    ext[static_cast<std::size_t>(i)] =
        ext_[static_cast<std::size_t>(i)] + o.ext_[static_cast<std::size_t>(i)] - 1;
  NProfile out(lo_ + o.lo_, ext);
  const std::int64_t na = cells(), nb = o.cells();
  for (std::int64_t ia = 0; ia < na; ++ia) {
    const double va = a_[static_cast<std::size_t>(ia)];
    if (va == 0.0) continue;
    const Site sa = site_at(ia);
    for (std::int64_t ib = 0; ib < nb; ++ib) {
      const double vb = o.a_[static_cast<std::size_t>(ib)];
      if (vb == 0.0) continue;
      out.ref(sa + o.site_at(ib)) += va * vb;
    }
  }
  return out;
}

NProfile& NProfile::scale(double s) noexcept {
  for (double& v : a_) v *= s;
  return *this;
}

NProfile& NProfile::add(const NProfile& o) {
  const std::int64_t n = o.cells();
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = o.a_[static_cast<std::size_t>(i)];
    if (v != 0.0) ref(o.site_at(i)) += v;
  }
  return *this;
}

NProfile NProfile::conv_pow(const NProfile& base, int q) {
  if (q < 0) throw PreconditionError("NProfile::conv_pow: negative power");
  if (q == 0) return delta(Site::zero(base.axes()));
  NProfile acc = base;
  for (int i = 1; i < q; ++i) acc = acc.conv(base);
  return acc;
}

// ---------------------------------------------------------------------------
// FieldArray

FieldArray::FieldArray(const Dims& dims, const Box& box) : dims_(dims), box_(box) {
  dims.validate();
  if (box.axes() != dims.total())
    throw PreconditionError("FieldArray: box axes must equal d + nu");
  a_.assign(static_cast<std::size_t>(box.cardinality()), 0.0);
}

double FieldArray::at(const Site& s) const noexcept {
  const std::int64_t idx = box_.index_of(s);
  return idx < 0 ? 0.0 : a_[static_cast<std::size_t>(idx)];
}

double& FieldArray::ref(const Site& s) {
  const std::int64_t idx = box_.index_of(s);
  if (idx < 0) throw PreconditionError("FieldArray::ref: site outside box " + s.str());
  return a_[static_cast<std::size_t>(idx)];
}

double FieldArray::l2_norm_sq() const noexcept {
  double acc = 0;
  for (double v : a_) acc += v * v;
  return acc;
}

double FieldArray::max_abs() const noexcept {
  double m = 0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

NProfile FieldArray::profile(const Site& j_spatial) const {
  std::vector<int> ext(static_cast<std::size_t>(dims_.nu));
  Site lo = Site::zero(dims_.nu);
  for (int i = 0; i < dims_.nu; ++i) {
    lo[i] = box_.center[i] - box_.radius[static_cast<std::size_t>(i)];
    ext[static_cast<std::size_t>(i)] = 2 * box_.radius[static_cast<std::size_t>(i)] + 1;
  }
  NProfile p(lo, ext);
  const std::int64_t cells = p.cells();
  for (std::int64_t i = 0; i < cells; ++i) {
    const Site n = p.site_at(i);
    const Site full = Site::from_jn(j_spatial, n);
    p.ref(n) = at(full);
  }
  return p;
}

FieldArray FieldArray::on_box(const Box& box) const {
  FieldArray out(dims_, box);
  const std::int64_t n = box.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = box.site_at(i);
    out.data()[static_cast<std::size_t>(i)] = at(s);
  }
  return out;
}

FieldArray convolve_n(const FieldArray& x, const FieldArray& z) {
  if (!(x.box() == z.box()) || x.dims().d != z.dims().d || x.dims().nu != z.dims().nu)
    throw PreconditionError("convolve_n: mismatched grids");
  FieldArray out(x.dims(), x.box());
  const Dims& dims = x.dims();
  // Spatial columns of the box.
  std::vector<int> jradii(static_cast<std::size_t>(dims.d));
  for (int i = 0; i < dims.d; ++i)
    jradii[static_cast<std::size_t>(i)] = x.box().radius[static_cast<std::size_t>(dims.nu + i)];
  const Box jbox = Box::around(x.box().center.spatial(dims), jradii);
  const std::int64_t njs = jbox.cardinality();
  for (std::int64_t ji = 0; ji < njs; ++ji) {
    const Site j = jbox.site_at(ji);
    const NProfile conv = x.profile(j).conv(z.profile(j));
    const std::int64_t cells = conv.cells();
    for (std::int64_t c = 0; c < cells; ++c) {
      const Site n = conv.site_at(c);
      const Site full = Site::from_jn(j, n);
      if (out.box().contains(full)) out.ref(full) = conv.at(n);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CoeffField

CoeffField CoeffField::initial(const Dims& dims, const Box& box, int p,
                               std::vector<double> amplitudes, std::vector<Site> resonant_spatial) {
  dims.validate();
  if (p < 1) throw PreconditionError("CoeffField: p >= 1 required");
  if (amplitudes.size() != resonant_spatial.size())
    throw PreconditionError("CoeffField: amplitude/site count mismatch");
  if (static_cast<int>(amplitudes.size()) != dims.nu)
    throw PreconditionError("CoeffField: need one resonant mode per frequency axis");
  for (const Site& j : resonant_spatial)
    if (j.axes() != dims.d) throw PreconditionError("CoeffField: resonant site axes != d");
  CoeffField y;
  y.dims_ = dims;
  y.p_ = p;
  y.amps_ = std::move(amplitudes);
  y.res_ = std::move(resonant_spatial);
  y.uhat_ = FieldArray(dims, box);
  y.vhat_ = FieldArray(dims, box);
  for (int k = 0; k < y.num_modes(); ++k) {
    if (!box.contains(y.pinned_site(k)) || !box.contains(y.mirror_site(k)))
      throw PreconditionError("CoeffField: box does not contain the resonant set");
  }
  y.pin();
  return y;
}

Site CoeffField::pinned_site(int k) const {
  const Site e = unit_freq_site(dims_.nu, k, -1);
  const Site& j = res_[static_cast<std::size_t>(k)];
  return Site::from_jn(j, e);
}

Site CoeffField::mirror_site(int k) const {
  const Site e = unit_freq_site(dims_.nu, k, +1);
  const Site& j = res_[static_cast<std::size_t>(k)];
  return Site::from_jn(j, e);
}

bool CoeffField::is_pinned_u(const Site& s) const {
  for (int k = 0; k < num_modes(); ++k)
    if (s == pinned_site(k)) return true;
  return false;
}

bool CoeffField::is_pinned_v(const Site& s) const {
  for (int k = 0; k < num_modes(); ++k)
    if (s == mirror_site(k)) return true;
  return false;
}

bool CoeffField::is_resonant_site(const Site& s) const {
  return is_pinned_u(s) || is_pinned_v(s);
}

void CoeffField::pin() {
  for (int k = 0; k < num_modes(); ++k) {
    uhat_.ref(pinned_site(k)) = amps_[static_cast<std::size_t>(k)];
    vhat_.ref(mirror_site(k)) = amps_[static_cast<std::size_t>(k)];
  }
}

double CoeffField::pinning_error() const {
  double m = 0;
  for (int k = 0; k < num_modes(); ++k) {
    m = std::max(m, std::abs(uhat_.at(pinned_site(k)) - amps_[static_cast<std::size_t>(k)]));
    m = std::max(m, std::abs(vhat_.at(mirror_site(k)) - amps_[static_cast<std::size_t>(k)]));
  }
  return m;
}

double CoeffField::conjugate_asymmetry() const {
  double m = 0;
  const Box& b = box();
  const std::int64_t n = b.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    Site mirror = s;
    for (int a = 0; a < dims_.nu; ++a) mirror[a] = -s[a];
    if (!b.contains(mirror)) continue;
    m = std::max(m, std::abs(vhat_.at(s) - uhat_.at(mirror)));
  }
  return m;
}

CoeffField CoeffField::on_box(const Box& box) const {
  CoeffField y = *this;
  y.uhat_ = uhat_.on_box(box);
  y.vhat_ = vhat_.on_box(box);
  for (int k = 0; k < num_modes(); ++k) {
    if (!box.contains(pinned_site(k)) || !box.contains(mirror_site(k)))
      throw PreconditionError("CoeffField::on_box: box drops the resonant set");
  }
  return y;
}

double CoeffField::norm() const noexcept {
  return std::sqrt(uhat_.l2_norm_sq() + vhat_.l2_norm_sq());
}

double CoeffField::diff_norm(const CoeffField& a, const CoeffField& b) {
  const Box& big =
      a.box().cardinality() >= b.box().cardinality() ? a.box() : b.box();
  double acc = 0;
  const std::int64_t n = big.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = big.site_at(i);
    const double du = a.uhat_.at(s) - b.uhat_.at(s);
    const double dv = a.vhat_.at(s) - b.vhat_.at(s);
    acc += du * du + dv * dv;
  }
  return std::sqrt(acc);
}

int CoeffField::support_radius(double floor) const {
  int r = 0;
  const Box& b = box();
  const std::int64_t n = b.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    if (std::abs(uhat_.at(s)) > floor || std::abs(vhat_.at(s)) > floor)
      r = std::max(r, s.linf());
  }
  return r;
}

double CoeffField::weighted_offres_sum(double c) const {
  double acc = 0;
  const Box& b = box();
  const std::int64_t n = b.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    if (is_pinned_u(s)) continue;
    const double mag = std::abs(uhat_.at(s));
    if (mag == 0.0) continue;
    acc += std::exp(c * static_cast<double>(s.l1())) * mag;
  }
  return acc;
}

std::string CoeffField::dump() const {
  std::ostringstream out;
  out << "# coefficient field\n";
  out << "# d = " << dims_.d << "\n# nu = " << dims_.nu << "\n# p = " << p_ << "\n";
  out << "# center =";
  for (int i = 0; i < box().axes(); ++i) out << " " << box().center[i];
  out << "\n# radius =";
  for (int i = 0; i < box().axes(); ++i) out << " " << box().radius[static_cast<std::size_t>(i)];
  out << "\n# columns = j n uhat vhat\n";
  const Box& b = box();
  const std::int64_t n = b.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    for (int a = 0; a < dims_.d; ++a) out << s.spatial_coord(dims_, a) << " ";
    for (int a = 0; a < dims_.nu; ++a) out << s.freq_coord(a) << " ";
    out << format_full(uhat_.at(s)) << " " << format_full(vhat_.at(s)) << "\n";
  }
  return out.str();
}

CoeffField CoeffField::parse_dump(std::istream& in, int p, std::vector<double> amplitudes,
                                  std::vector<Site> resonant_spatial, const Dims& dims) {
  std::string line;
  Site center;
  std::vector<int> radii;
  int d = -1, nu = -1;
  std::vector<std::pair<Site, std::pair<double, double>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key, eq;
      ls >> key;
      if (key == "d") ls >> eq >> d;
      else if (key == "nu") ls >> eq >> nu;
      else if (key == "center") {
        if (d < 0 || nu < 0) throw ConfigError("field dump: center before dims");
        std::vector<int> c(static_cast<std::size_t>(d + nu));
        ls >> eq;
        for (int& v : c) ls >> v;
        center = Site(std::span<const int>(c));
      } else if (key == "radius") {
        if (d < 0 || nu < 0) throw ConfigError("field dump: radius before dims");
        radii.assign(static_cast<std::size_t>(d + nu), 0);
        ls >> eq;
        for (int& v : radii) ls >> v;
      }
      continue;
    }
    if (d != dims.d || nu != dims.nu) throw ConfigError("field dump: dimension mismatch");
    std::istringstream ls(line);
    std::vector<int> j(static_cast<std::size_t>(d)), nvec(static_cast<std::size_t>(nu));
    for (int& v : j) ls >> v;
    for (int& v : nvec) ls >> v;
    double uu = 0, vv = 0;
    ls >> uu >> vv;
    if (!ls) throw ConfigError("field dump: malformed row: " + line);
    rows.push_back({Site::from_jn(std::span<const int>(j), std::span<const int>(nvec)),
                    {uu, vv}});
  }
  if (radii.empty()) throw ConfigError("field dump: missing box header");
  const Box box = Box::around(center, radii);
  CoeffField y = CoeffField::initial(dims, box, p, std::move(amplitudes),
                                     std::move(resonant_spatial));
  for (const auto& [site, uv] : rows) {
    y.uhat().ref(site) = uv.first;
    y.vhat().ref(site) = uv.second;
  }
  return y;
}

void CoeffField::save(const std::string& path) const { atomic_write_file(path, dump()); }

CoeffField CoeffField::load(const std::string& path, int p, std::vector<double> amplitudes,
                            std::vector<Site> resonant_spatial, const Dims& dims) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field dump: " + path);
  return parse_dump(in, p, std::move(amplitudes), std::move(resonant_spatial), dims);
}

// ---------------------------------------------------------------------------
// Nonlinear map and diagnostics

namespace {

Box spatial_box_of(const Dims& dims, const Box& box) {
  std::vector<int> jradii(static_cast<std::size_t>(dims.d));
  for (int i = 0; i < dims.d; ++i)
    jradii[static_cast<std::size_t>(i)] = box.radius[static_cast<std::size_t>(dims.nu + i)];
  return Box::around(box.center.spatial(dims), jradii);
}

Site join_jn(const Dims& dims, const Site& j, const Site& n) {
  return Site::from_jn(j, n);
}

}  // namespace

Residual eval_F(const CoeffField& y, const Frequencies& omega, double eps, double delta,
                const DisorderRealization& pot) {
  const Dims& dims = y.dims();
  if (omega.nu() != dims.nu) throw PreconditionError("eval_F: omega dimension mismatch");
  const Box& b = y.box();
  Residual r{FieldArray(dims, b), FieldArray(dims, b)};

  const Box jbox = spatial_box_of(dims, b);
  const std::int64_t njs = jbox.cardinality();

  // Nonlinear profiles per spatial column.
  std::vector<NProfile> nl1, nl2;
  if (delta != 0.0) {
    nl1.reserve(static_cast<std::size_t>(njs));
    nl2.reserve(static_cast<std::size_t>(njs));
    for (std::int64_t ji = 0; ji < njs; ++ji) {
      const Site j = jbox.site_at(ji);
      const NProfile up = y.uhat().profile(j);
      const NProfile vp = y.vhat().profile(j);
      const NProfile ap = NProfile::conv_pow(up.conv(vp), y.p());
      nl1.push_back(ap.conv(up));
      nl2.push_back(ap.conv(vp));
    }
  }

  const std::int64_t cells = b.cardinality();
  for (std::int64_t i = 0; i < cells; ++i) {
    const Site s = b.site_at(i);
    const Site j = s.spatial(dims);
    const Site n = s.freq(dims);
    const double now = omega.dot(n);
    const double vj = pot.value(j);
    double f1 = (now + vj) * y.uhat().at(s);
    double f2 = (-now + vj) * y.vhat().at(s);
    if (eps != 0.0) {
      double lap_u = 0, lap_v = 0;
      for (int a = 0; a < dims.d; ++a) {
        for (int step : {-1, +1}) {
          Site nb = s;
          nb[dims.nu + a] += step;
          lap_u += y.uhat().at(nb);
          lap_v += y.vhat().at(nb);
        }
      }
      f1 += eps * lap_u;
      f2 += eps * lap_v;
    }
    if (delta != 0.0) {
      const std::int64_t ji = jbox.index_of(j);
      f1 += delta * nl1[static_cast<std::size_t>(ji)].at(n);
      f2 += delta * nl2[static_cast<std::size_t>(ji)].at(n);
    }
    r.f1.data()[static_cast<std::size_t>(i)] = f1;
    r.f2.data()[static_cast<std::size_t>(i)] = f2;
  }
  return r;
}

double Residual::norm_off_pinned(const CoeffField& y) const {
  double acc = 0;
  const Box& b = f1.box();
  const std::int64_t n = b.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    if (!y.is_pinned_u(s)) {
      const double v = f1.data()[static_cast<std::size_t>(i)];
      acc += v * v;
    }
    if (!y.is_pinned_v(s)) {
      const double v = f2.data()[static_cast<std::size_t>(i)];
      acc += v * v;
    }
  }
  return std::sqrt(acc);
}

std::complex<double> reconstruct_u(const CoeffField& y, const Frequencies& omega,
                                   const Site& spatial_site, double t) {
  const Dims& dims = y.dims();
  std::complex<double> acc = 0;
  const NProfile prof = y.uhat().profile(spatial_site);
  const std::int64_t cells = prof.cells();
  for (std::int64_t i = 0; i < cells; ++i) {
    const double c = prof.at(prof.site_at(i));
    if (c == 0.0) continue;
    const double phase = omega.dot(prof.site_at(i)) * t;
    acc += c * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  (void)dims;
  return acc;
}

DecayFit decay_fit(const CoeffField& y) {
  const Box& b = y.box();
  const std::int64_t n = b.cardinality();
  std::vector<double> dist, neglog;
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    if (s.l1() <= y.dims().total()) continue;
    const double mag = std::max(std::abs(y.uhat().at(s)), std::abs(y.vhat().at(s)));
    if (mag <= 1e-300) continue;
    dist.push_back(static_cast<double>(s.l1()));
    neglog.push_back(-std::log(mag));
  }
  DecayFit out;
  if (dist.empty()) return out;  // +inf sentinel
  out.alpha = fit_line(dist, neglog).slope;
  double viol = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double mag = std::exp(-neglog[i]);
    viol = std::max(viol, mag * std::exp(out.alpha * dist[i]) - 1.0);
  }
  out.max_violation = std::max(0.0, viol);
  return out;
}

double uniform_decay_rate(const CoeffField& y) {
  const Box& b = y.box();
  const std::int64_t n = b.cardinality();
  double rate = kInfinity;
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = b.site_at(i);
    if (s.l1() < 1) continue;
    const double mag_u = y.is_pinned_u(s) ? 0.0 : std::abs(y.uhat().at(s));
    const double mag_v = y.is_pinned_v(s) ? 0.0 : std::abs(y.vhat().at(s));
    const double mag = std::max(mag_u, mag_v);
    if (mag <= 1e-300) continue;
    rate = std::min(rate, -std::log(mag) / static_cast<double>(s.l1()));
  }
  return rate;
}

SKernels build_s_kernels(const CoeffField& y, const Site& j_spatial) {
  const NProfile up = y.uhat().profile(j_spatial);
  const NProfile vp = y.vhat().profile(j_spatial);
  const NProfile a = up.conv(vp);
  const int p = y.p();
  SKernels k;
  k.k11 = NProfile::conv_pow(a, p).scale(p + 1);
  const NProfile am1 = NProfile::conv_pow(a, p - 1);
  k.k12 = am1.conv(up).conv(up).scale(p);
  k.k21 = am1.conv(vp).conv(vp).scale(p);
  return k;
}

}  // namespace qpdnls
