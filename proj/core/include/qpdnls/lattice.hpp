#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qpdnls/support.hpp"

namespace qpdnls {

inline constexpr int kMaxAxes = 6;

/// Problem dimensions: d spatial axes, nu frequency axes.
struct Dims {
  int d = 1;
  int nu = 1;
  int total() const noexcept { return d + nu; }
  void validate() const {
    if (d < 1 || nu < 1) throw PreconditionError("Dims: d >= 1 and nu >= 1 required");
    if (d + nu > kMaxAxes) throw PreconditionError("Dims: d + nu exceeds kMaxAxes");
  }
};

/// A point of Z^m, m <= kMaxAxes.
///
/// Coordinate storage convention: for product-space sites the frequency
/// coordinates n come first, the spatial coordinates j last. Plain
/// lexicographic comparison on the stored coordinates is therefore the
/// canonical site order (n-major), which keeps the Toeplitz-in-n block
/// structure of the linearized operator contiguous. Pure spatial sites
/// simply hold d coordinates.
class Site {
public:
  Site() = default;
  explicit Site(std::span<const int> coords);
  Site(std::initializer_list<int> coords);

  static Site zero(int axes);
  /// Builds a product-space site from its (j, n) parts.
  static Site from_jn(std::span<const int> j, std::span<const int> n);
  static Site from_jn(std::initializer_list<int> j, std::initializer_list<int> n);
  static Site from_jn(const Site& j, const Site& n);

  int axes() const noexcept { return axes_; }
  int operator[](int i) const noexcept { return c_[static_cast<std::size_t>(i)]; }
  int& operator[](int i) noexcept { return c_[static_cast<std::size_t>(i)]; }
  std::span<const int> coords() const noexcept {
    return {c_.data(), static_cast<std::size_t>(axes_)};
  }

  /// Spatial part (last d coordinates) as a d-axis site.
  Site spatial(const Dims& dims) const;
  /// Frequency part (first nu coordinates) as a nu-axis site.
  Site freq(const Dims& dims) const;
  int freq_coord(int k) const noexcept { return c_[static_cast<std::size_t>(k)]; }
  int spatial_coord(const Dims& dims, int k) const noexcept {
    return c_[static_cast<std::size_t>(dims.nu + k)];
  }

  long l1() const noexcept;
  int linf() const noexcept;

  Site operator+(const Site& o) const;
  Site operator-(const Site& o) const;
  Site operator-() const;

  bool operator==(const Site& o) const noexcept;
  bool operator!=(const Site& o) const noexcept { return !(*this == o); }
  /// Lexicographic on stored coordinates (n-major for product sites).
  bool operator<(const Site& o) const noexcept;

  std::string str() const;

private:
  std::array<int, kMaxAxes> c_{};
  int axes_ = 0;
};

long l1_norm(const Site& s) noexcept;
long l1_distance(const Site& a, const Site& b);

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(s.axes());
    for (int i = 0; i < s.axes(); ++i)
      h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(s[i])));
    return static_cast<std::size_t>(h);
  }
};

/// Axis-aligned hyper-rectangle: |c_i - center_i| <= radius_i per axis.
struct Box {
  Site center;
  std::array<std::int32_t, kMaxAxes> radius{};

  static Box cube(int axes, int r, Site center = Site());
  static Box around(const Site& center, std::span<const int> radii);

  int axes() const noexcept { return center.axes(); }
  bool contains(const Site& s) const noexcept;
  std::int64_t cardinality() const noexcept;
  /// Mixed-radix rank of a member site in lexicographic order.
  std::int64_t index_of(const Site& s) const noexcept;  // -1 when outside
  Site site_at(std::int64_t idx) const;
  Site lo() const;
  Site hi() const;
  Box shifted(const Site& k) const;
  bool operator==(const Box& o) const noexcept;
};

/// A hyper-rectangle R minus an optional shifted copy of itself, R \ (R+k).
class ElementaryRegion {
public:
  ElementaryRegion() = default;
  explicit ElementaryRegion(Box base) : base_(base) {}
  ElementaryRegion(Box base, Site cut_shift) : base_(base), cut_(cut_shift) {}

  static ElementaryRegion cube(int axes, int r, Site center = Site());

  const Box& base() const noexcept { return base_; }
  const std::optional<Site>& cut_shift() const noexcept { return cut_; }
  int axes() const noexcept { return base_.axes(); }
  /// 2 * max base radius.
  int diameter() const noexcept;

  bool contains(const Site& s) const noexcept;
  /// Members in deterministic lexicographic (n-major) order.
  std::vector<Site> enumerate() const;
  std::int64_t cardinality() const;
  /// Projection onto the spatial axes (set of distinct spatial parts).
  std::vector<Site> spatial_projection(const Dims& dims) const;

private:
  Box base_;
  std::optional<Site> cut_;
};

/// Sites of `region` having an l1-neighbor in `ambient` outside `region`.
/// Throws PreconditionError when region is not contained in ambient.
std::vector<Site> interior_boundary(const ElementaryRegion& region,
                                    const ElementaryRegion& ambient);

/// Enumerated region with O(1) site -> rank lookup.
class RegionIndex {
public:
  RegionIndex() = default;
  explicit RegionIndex(const ElementaryRegion& region);

  int size() const noexcept { return static_cast<int>(sites_.size()); }
  const Site& operator[](int i) const noexcept { return sites_[static_cast<std::size_t>(i)]; }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  int find(const Site& s) const noexcept;  // -1 when absent
  const ElementaryRegion& region() const noexcept { return region_; }

private:
  ElementaryRegion region_;
  std::vector<Site> sites_;
  std::unordered_map<Site, int, SiteHash> pos_;
};

}  // namespace qpdnls
