#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <sstream>

#include "qpdnls/disorder.hpp"
#include "test_util.hpp"

using namespace qpdnls;

TEST_CASE("degenerate distribution gives constant potential") {
  const auto pot = DisorderRealization::sample({0.5, 0.5}, Box::cube(1, 4), 7);
  for (int j = -4; j <= 4; ++j) CHECK(pot.value(Site{j}) == 0.5);
}

TEST_CASE("sampling is deterministic in the seed") {
  const Box box = Box::cube(2, 3);
  const auto a = DisorderRealization::sample({0, 1}, box, 99);
  const auto b = DisorderRealization::sample({0, 1}, box, 99);
  const auto c = DisorderRealization::sample({0, 1}, box, 100);
  bool any_diff = false;
  for (std::int64_t i = 0; i < box.cardinality(); ++i) {
    const Site s = box.site_at(i);
    CHECK(a.value(s) == b.value(s));
    if (a.value(s) != c.value(s)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("empirical mean of 1e4 samples is near 1/2") {
  const Box box = Box::cube(1, 4999);  // 9999 sites
  const auto pot = DisorderRealization::sample({0, 1}, box, 1234);
  double acc = 0;
  for (std::int64_t i = 0; i < box.cardinality(); ++i) acc += pot.value(box.site_at(i));
  const double mean = acc / static_cast<double>(box.cardinality());
  CHECK(std::abs(mean - 0.5) < 0.02);
}

TEST_CASE("per-site keying: shifted box leaves overlap values unchanged") {
  const auto a = DisorderRealization::sample({0, 1}, Box::cube(2, 3), 5);
  const auto b =
      DisorderRealization::sample({0, 1}, Box::cube(2, 3, Site{2, 2}), 5);
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y) CHECK(a.value(Site{x, y}) == b.value(Site{x, y}));
}

TEST_CASE("resonant-site override wins over the hash") {
  auto pot = DisorderRealization::sample({0, 1}, Box::cube(1, 3), 5);
  const double orig = pot.value(Site{1});
  pot.set_value(Site{1}, 0.77);
  CHECK(pot.value(Site{1}) == 0.77);
  CHECK(pot.hashed_value(Site{1}) == orig);
}

TEST_CASE("assemble_H: eps = 0 gives the diagonal potential matrix") {
  const auto pot = DisorderRealization::sample({0, 1}, Box::cube(1, 3), 21);
  const auto h = assemble_H(0.0, pot, ElementaryRegion::cube(1, 3));
  const Eigen::MatrixXd m = h.matrix();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      if (i == j)
        CHECK(m(i, i) == pot.value(h.index[i]));
      else
        CHECK(m(i, j) == 0.0);
    }
}

TEST_CASE("assemble_H: 1d three sites is tridiagonal with eps off-diagonal") {
  const auto pot = DisorderRealization::sample({0, 1}, Box::cube(1, 1), 3);
  const auto h = assemble_H(0.1, pot, ElementaryRegion::cube(1, 1));
  const Eigen::MatrixXd m = h.matrix();
  REQUIRE(m.rows() == 3);
  CHECK(m(0, 1) == 0.1);
  CHECK(m(1, 0) == 0.1);
  CHECK(m(1, 2) == 0.1);
  CHECK(m(2, 1) == 0.1);
  CHECK(m(0, 2) == 0.0);
  CHECK(m(2, 0) == 0.0);
}

TEST_CASE("assemble_H is exactly symmetric and eigenvalues sit in the bounds") {
  test::Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = rng.uniform_int(1, 2);
    const int r = d == 1 ? rng.uniform_int(2, 10) : rng.uniform_int(1, 3);
    const double eps = rng.uniform(0, 0.2);
    const Distribution dist{0, 1};
    const auto pot = DisorderRealization::sample(dist, Box::cube(d, r), rng.next());
    const auto h = assemble_H(eps, pot, ElementaryRegion::cube(d, r));
    const Eigen::MatrixXd m = h.matrix();
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);  // bitwise symmetric
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const auto [lo, hi] = spectrum_bounds(eps, dist, d);
    CHECK(es.eigenvalues().minCoeff() >= lo - 1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= hi + 1e-12);
  }
}

TEST_CASE("assemble_H rejects regions escaping the potential box") {
  const auto pot = DisorderRealization::sample({0, 1}, Box::cube(1, 2), 3);
  CHECK_THROWS_AS(assemble_H(0.1, pot, ElementaryRegion::cube(1, 3)), PreconditionError);
}

TEST_CASE("spectrum bounds formula") {
  const auto [lo1, hi1] = spectrum_bounds(0.01, {0, 1}, 1);
  CHECK(lo1 == doctest::Approx(-0.02).epsilon(1e-15));
  CHECK(hi1 == doctest::Approx(1.02).epsilon(1e-15));
  const auto [lo2, hi2] = spectrum_bounds(0.0, {0.25, 0.75}, 3);
  CHECK(lo2 == 0.25);
  CHECK(hi2 == 0.75);
  const auto [lo3, hi3] = spectrum_bounds(0.05, {0, 1}, 2);
  CHECK(lo3 == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(hi3 == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("serialization round trip") {
  auto pot = DisorderRealization::sample({0, 1}, Box::cube(2, 2), 42);
  pot.set_value(Site{1, -1}, 0.123456789012345678);
  const std::string text = pot.serialize();
  std::istringstream in(text);
  const auto back = DisorderRealization::deserialize(in);
  CHECK(back.seed() == 42);
  CHECK(back.dist().lo == 0.0);
  CHECK(back.dist().hi == 1.0);
  // Table path: every value reproduced exactly (full decimal round trip).
  const Box& box = pot.box();
  for (std::int64_t i = 0; i < box.cardinality(); ++i) {
    const Site s = box.site_at(i);
    CHECK(back.value(s) == pot.value(s));
  }
  // Header path: regeneration from (seed, dist, box) is bit-exact.
  const auto regen = DisorderRealization::sample(back.dist(), back.box(), back.seed());
  for (std::int64_t i = 0; i < box.cardinality(); ++i) {
    const Site s = box.site_at(i);
    CHECK(regen.value(s) == pot.hashed_value(s));
  }
}
