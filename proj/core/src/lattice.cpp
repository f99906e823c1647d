#include "qpdnls/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace qpdnls {

Site::Site(std::span<const int> coords) {
  if (coords.size() > kMaxAxes) throw PreconditionError("Site: too many axes");
  axes_ = static_cast<int>(coords.size());
  for (int i = 0; i < axes_; ++i) c_[static_cast<std::size_t>(i)] = coords[static_cast<std::size_t>(i)];
}

Site::Site(std::initializer_list<int> coords)
    : Site(std::span<const int>(coords.begin(), coords.size())) {}

Site Site::zero(int axes) {
  if (axes < 0 || axes > kMaxAxes) throw PreconditionError("Site::zero: bad axis count");
  Site s;
  s.axes_ = axes;
  return s;
}

Site Site::from_jn(std::span<const int> j, std::span<const int> n) {
  if (j.size() + n.size() > kMaxAxes) throw PreconditionError("Site::from_jn: too many axes");
  Site s;
  s.axes_ = static_cast<int>(j.size() + n.size());
  int a = 0;
  for (int v : n) s.c_[static_cast<std::size_t>(a++)] = v;
  for (int v : j) s.c_[static_cast<std::size_t>(a++)] = v;
  return s;
}

Site Site::from_jn(std::initializer_list<int> j, std::initializer_list<int> n) {
  return from_jn(std::span<const int>(j.begin(), j.size()),
                 std::span<const int>(n.begin(), n.size()));
}

Site Site::from_jn(const Site& j, const Site& n) { return from_jn(j.coords(), n.coords()); }

Site Site::spatial(const Dims& dims) const {
  Site s;
  s.axes_ = dims.d;
  for (int i = 0; i < dims.d; ++i) s.c_[static_cast<std::size_t>(i)] = c_[static_cast<std::size_t>(dims.nu + i)];
  return s;
}

Site Site::freq(const Dims& dims) const {
  Site s;
  s.axes_ = dims.nu;
  for (int i = 0; i < dims.nu; ++i) s.c_[static_cast<std::size_t>(i)] = c_[static_cast<std::size_t>(i)];
  return s;
}

long Site::l1() const noexcept {
  long acc = 0;
  for (int i = 0; i < axes_; ++i) acc += std::labs(c_[static_cast<std::size_t>(i)]);
  return acc;
}

int Site::linf() const noexcept {
  int acc = 0;
  for (int i = 0; i < axes_; ++i) acc = std::max(acc, std::abs(c_[static_cast<std::size_t>(i)]));
  return acc;
}

Site Site::operator+(const Site& o) const {
  if (axes_ != o.axes_) throw PreconditionError("Site: axis mismatch in +");
  Site s = *this;
  for (int i = 0; i < axes_; ++i) s.c_[static_cast<std::size_t>(i)] += o.c_[static_cast<std::size_t>(i)];
  return s;
}

Site Site::operator-(const Site& o) const {
  if (axes_ != o.axes_) throw PreconditionError("Site: axis mismatch in -");
  Site s = *this;
  for (int i = 0; i < axes_; ++i) s.c_[static_cast<std::size_t>(i)] -= o.c_[static_cast<std::size_t>(i)];
  return s;
}

Site Site::operator-() const {
  Site s = *this;
  for (int i = 0; i < axes_; ++i) s.c_[static_cast<std::size_t>(i)] = -s.c_[static_cast<std::size_t>(i)];
  return s;
}

bool Site::operator==(const Site& o) const noexcept {
  if (axes_ != o.axes_) return false;
  for (int i = 0; i < axes_; ++i)
    if (c_[static_cast<std::size_t>(i)] != o.c_[static_cast<std::size_t>(i)]) return false;
  return true;
}

bool Site::operator<(const Site& o) const noexcept {
  for (int i = 0; i < std::min(axes_, o.axes_); ++i) {
    if (c_[static_cast<std::size_t>(i)] != o.c_[static_cast<std::size_t>(i)])
      return c_[static_cast<std::size_t>(i)] < o.c_[static_cast<std::size_t>(i)];
  }
  return axes_ < o.axes_;
}

std::string Site::str() const {
  std::ostringstream ss;
  ss << '(';
  for (int i = 0; i < axes_; ++i) {
    if (i) ss << ',';
    ss << c_[static_cast<std::size_t>(i)];
  }
  ss << ')';
  return ss.str();
}

long l1_norm(const Site& s) noexcept { return s.l1(); }

long l1_distance(const Site& a, const Site& b) { return (a - b).l1(); }

Box Box::cube(int axes, int r, Site center) {
  if (r < 0) throw PreconditionError("Box: negative radius");
  Box b;
  b.center = (center.axes() == axes) ? center : Site::zero(axes);
  for (int i = 0; i < axes; ++i) b.radius[static_cast<std::size_t>(i)] = r;
  return b;
}

Box Box::around(const Site& center, std::span<const int> radii) {
  if (static_cast<int>(radii.size()) != center.axes())
    throw PreconditionError("Box: radii/center axis mismatch");
  Box b;
  b.center = center;
  for (int i = 0; i < center.axes(); ++i) {
    if (radii[static_cast<std::size_t>(i)] < 0) throw PreconditionError("Box: negative radius");
    b.radius[static_cast<std::size_t>(i)] = radii[static_cast<std::size_t>(i)];
  }
  return b;
}

bool Box::contains(const Site& s) const noexcept {
  if (s.axes() != axes()) return false;
  for (int i = 0; i < axes(); ++i)
    if (std::abs(s[i] - center[i]) > radius[static_cast<std::size_t>(i)]) return false;
  return true;
}

std::int64_t Box::cardinality() const noexcept {
  std::int64_t n = 1;
  for (int i = 0; i < axes(); ++i) n *= 2 * radius[static_cast<std::size_t>(i)] + 1;
  return n;
}

std::int64_t Box::index_of(const Site& s) const noexcept {
  if (!contains(s)) return -1;
  std::int64_t idx = 0;
  for (int i = 0; i < axes(); ++i) {
    const std::int64_t width = 2 * radius[static_cast<std::size_t>(i)] + 1;
    idx = idx * width + (s[i] - center[i] + radius[static_cast<std::size_t>(i)]);
  }
  return idx;
}

Site Box::site_at(std::int64_t idx) const {
  Site s = Site::zero(axes());
  for (int i = axes() - 1; i >= 0; --i) {
    const std::int64_t width = 2 * radius[static_cast<std::size_t>(i)] + 1;
    s[i] = static_cast<int>(idx % width) - radius[static_cast<std::size_t>(i)] + center[i];
    idx /= width;
  }
  return s;
}

Site Box::lo() const {
  Site s = center;
  for (int i = 0; i < axes(); ++i) s[i] -= radius[static_cast<std::size_t>(i)];
  return s;
}

Site Box::hi() const {
  Site s = center;
  for (int i = 0; i < axes(); ++i) s[i] += radius[static_cast<std::size_t>(i)];
  return s;
}

Box Box::shifted(const Site& k) const {
  Box b = *this;
  b.center = center + k;
  return b;
}

bool Box::operator==(const Box& o) const noexcept {
  if (!(center == o.center)) return false;
  for (int i = 0; i < axes(); ++i)
    if (radius[static_cast<std::size_t>(i)] != o.radius[static_cast<std::size_t>(i)]) return false;
  return true;
}

ElementaryRegion ElementaryRegion::cube(int axes, int r, Site center) {
  return ElementaryRegion(Box::cube(axes, r, center));
}

int ElementaryRegion::diameter() const noexcept {
  int rmax = 0;
  for (int i = 0; i < base_.axes(); ++i)
    rmax = std::max(rmax, base_.radius[static_cast<std::size_t>(i)]);
  return 2 * rmax;
}

bool ElementaryRegion::contains(const Site& s) const noexcept {
  if (!base_.contains(s)) return false;
  if (cut_ && base_.shifted(*cut_).contains(s)) return false;
  return true;
}

std::vector<Site> ElementaryRegion::enumerate() const {
  std::vector<Site> out;
  const std::int64_t n = base_.cardinality();
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Site s = base_.site_at(i);
    if (contains(s)) out.push_back(s);
  }
  return out;
}

std::int64_t ElementaryRegion::cardinality() const {
  if (!cut_) return base_.cardinality();
  // |R \ (R+k)| = |R| - |R ∩ (R+k)|
  std::int64_t overlap = 1;
  for (int i = 0; i < base_.axes(); ++i) {
    const int width = 2 * base_.radius[static_cast<std::size_t>(i)] + 1;
    const int shift = std::abs((*cut_)[i]);
    overlap *= std::max(0, width - shift);
  }
  return base_.cardinality() - overlap;
}

std::vector<Site> ElementaryRegion::spatial_projection(const Dims& dims) const {
  std::vector<Site> out;
  std::unordered_map<Site, char, SiteHash> seen;
  for (const Site& s : enumerate()) {
    Site js = s.spatial(dims);
    if (seen.emplace(js, 1).second) out.push_back(js);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Site> interior_boundary(const ElementaryRegion& region,
                                    const ElementaryRegion& ambient) {
  std::vector<Site> members = region.enumerate();
  for (const Site& s : members)
    if (!ambient.contains(s))
      throw PreconditionError("interior_boundary: region not contained in ambient");
  std::vector<Site> out;
  const int axes = region.axes();
  for (const Site& s : members) {
    bool boundary = false;
    for (int a = 0; a < axes && !boundary; ++a) {
      for (int step : {-1, +1}) {
        Site nb = s;
        nb[a] += step;
        if (ambient.contains(nb) && !region.contains(nb)) {
          boundary = true;
          break;
        }
      }
    }
    if (boundary) out.push_back(s);
  }
  return out;
}

RegionIndex::RegionIndex(const ElementaryRegion& region)
    : region_(region), sites_(region.enumerate()) {
  pos_.reserve(sites_.size());
  for (int i = 0; i < static_cast<int>(sites_.size()); ++i)
    pos_.emplace(sites_[static_cast<std::size_t>(i)], i);
}

int RegionIndex::find(const Site& s) const noexcept {
  auto it = pos_.find(s);
  return it == pos_.end() ? -1 : it->second;
}

}  // namespace qpdnls
