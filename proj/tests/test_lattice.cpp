#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "qpdnls/lattice.hpp"
#include "test_util.hpp"

using namespace qpdnls;

TEST_CASE("l1 norm") {
  CHECK(l1_norm(Site::from_jn({0}, {0})) == 0);
  CHECK(l1_norm(Site::from_jn({3}, {-4})) == 7);
  CHECK(l1_norm(Site::from_jn({1, -2}, {0, 5})) == 8);
}

TEST_CASE("l1 triangle inequality on random triples") {
  test::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int axes = rng.uniform_int(1, 4);
    Site a = Site::zero(axes), b = Site::zero(axes), c = Site::zero(axes);
    for (int i = 0; i < axes; ++i) {
      a[i] = rng.uniform_int(-20, 20);
      b[i] = rng.uniform_int(-20, 20);
      c[i] = rng.uniform_int(-20, 20);
    }
    CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c));
  }
}

TEST_CASE("site ordering is n-major lexicographic") {
  // (j, n) storage puts n first, so comparison is n-major.
  const Site a = Site::from_jn({5}, {0});
  const Site b = Site::from_jn({-5}, {1});
  CHECK(a < b);
  const Site c = Site::from_jn({-1}, {0});
  CHECK(c < a);
}

TEST_CASE("box membership and cardinality") {
  const Box box = Box::around(Site::from_jn({1}, {0}), std::vector<int>{2, 3});
  CHECK(box.cardinality() == 5 * 7);
  CHECK(box.contains(Site::from_jn({4}, {0})));
  CHECK(!box.contains(Site::from_jn({5}, {0})));
  // index_of/site_at round trip in enumeration order
  for (std::int64_t i = 0; i < box.cardinality(); ++i)
    CHECK(box.index_of(box.site_at(i)) == i);
}

TEST_CASE("enumerate: cube radius 1 in 2 axes has 9 sites") {
  const auto sites = ElementaryRegion::cube(2, 1).enumerate();
  CHECK(sites.size() == 9);
  CHECK(std::is_sorted(sites.begin(), sites.end()));
}

TEST_CASE("enumerate: disjoint cut removes nothing") {
  const Box base = Box::cube(2, 2);
  const ElementaryRegion region(base, Site{5, 5});
  CHECK(region.enumerate().size() == 25);
  CHECK(region.cardinality() == 25);
}

TEST_CASE("enumerate: overlapping cut") {
  const Box base = Box::cube(2, 2);
  const ElementaryRegion region(base, Site{2, 2});
  // Exhaustive oracle of R \ (R+k).
  std::set<std::pair<int, int>> expect;
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y)
      if (!(x >= 0 && y >= 0))  // (R+k) covers [0,4]^2, overlap is [0,2]^2
        expect.insert({x, y});
  const auto got = region.enumerate();
  CHECK(got.size() == 16);
  CHECK(got.size() == expect.size());
  CHECK(region.cardinality() == 16);
  for (const Site& s : got) CHECK(expect.count({s[0], s[1]}) == 1);
}

TEST_CASE("enumerate matches brute-force membership on random regions") {
  test::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int axes = rng.uniform_int(1, 3);
    std::vector<int> radii;
    for (int a = 0; a < axes; ++a) radii.push_back(rng.uniform_int(0, 3));
    Site center = Site::zero(axes), shift = Site::zero(axes);
    for (int a = 0; a < axes; ++a) {
      center[a] = rng.uniform_int(-2, 2);
      shift[a] = rng.uniform_int(-4, 4);
    }
    const Box base = Box::around(center, radii);
    const ElementaryRegion region =
        rng.uniform() < 0.5 ? ElementaryRegion(base) : ElementaryRegion(base, shift);
    // Brute force over an inflated bounding box.
    std::int64_t count = 0;
    const Box hull = Box::around(center, std::vector<int>(radii.begin(), radii.end()));
    for (std::int64_t i = 0; i < hull.cardinality(); ++i)
      if (region.contains(hull.site_at(i))) ++count;
    const auto sites = region.enumerate();
    CHECK(static_cast<std::int64_t>(sites.size()) == count);
    CHECK(static_cast<std::int64_t>(sites.size()) == region.cardinality());
    CHECK(std::is_sorted(sites.begin(), sites.end()));
    const auto dup = std::adjacent_find(sites.begin(), sites.end());
    CHECK(dup == sites.end());
  }
}

TEST_CASE("interior boundary: W equals ambient is empty") {
  const ElementaryRegion w = ElementaryRegion::cube(2, 2);
  CHECK(interior_boundary(w, w).empty());
}

TEST_CASE("interior boundary: single inner site is its own boundary") {
  const ElementaryRegion w(Box::cube(2, 0, Site{1, 1}));
  const ElementaryRegion ambient = ElementaryRegion::cube(2, 3);
  const auto b = interior_boundary(w, ambient);
  REQUIRE(b.size() == 1);
  CHECK(b[0] == Site{1, 1});
}

TEST_CASE("interior boundary: [-1,1]^2 inside [-3,3]^2 is the 8-site perimeter") {
  const ElementaryRegion w = ElementaryRegion::cube(2, 1);
  const ElementaryRegion ambient = ElementaryRegion::cube(2, 3);
  const auto b = interior_boundary(w, ambient);
  CHECK(b.size() == 8);  // all of W except the center
  for (const Site& s : b) CHECK(s.linf() == 1);
}

TEST_CASE("interior boundary properties on random pairs") {
  test::Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const int axes = rng.uniform_int(1, 3);
    const int r_in = rng.uniform_int(0, 2);
    const int r_out = r_in + rng.uniform_int(0, 2);
    const ElementaryRegion w = ElementaryRegion::cube(axes, r_in);
    const ElementaryRegion ambient = ElementaryRegion::cube(axes, r_out);
    for (const Site& s : interior_boundary(w, ambient)) {
      CHECK(w.contains(s));
      bool has_exterior_neighbor = false;
      for (int a = 0; a < axes && !has_exterior_neighbor; ++a)
        for (int step : {-1, +1}) {
          Site nb = s;
          nb[a] += step;
          if (ambient.contains(nb) && !w.contains(nb)) has_exterior_neighbor = true;
        }
      CHECK(has_exterior_neighbor);
    }
  }
}

TEST_CASE("interior boundary rejects region escaping ambient") {
  const ElementaryRegion w = ElementaryRegion::cube(2, 3);
  const ElementaryRegion ambient = ElementaryRegion::cube(2, 2);
  CHECK_THROWS_AS(interior_boundary(w, ambient), PreconditionError);
}

TEST_CASE("region diameter is twice the max radius") {
  const ElementaryRegion r(Box::around(Site::zero(3), std::vector<int>{2, 5, 1}));
  CHECK(r.diameter() == 10);
}
