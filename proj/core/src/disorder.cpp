#include "qpdnls/disorder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace qpdnls {

namespace {

std::uint64_t site_key(std::uint64_t seed, const Site& j) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (int i = 0; i < j.axes(); ++i)
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(j[i])));
  return h;
}

}  // namespace

DisorderRealization DisorderRealization::sample(const Distribution& dist, const Box& box,
                                                std::uint64_t seed) {
  dist.validate();
  if (box.cardinality() <= 0) throw PreconditionError("sample: empty box");
  DisorderRealization r;
  r.box_ = box;
  r.dist_ = dist;
  r.seed_ = seed;
  return r;
}

double DisorderRealization::hashed_value(const Site& j) const noexcept {
  const double u = key_to_unit(site_key(seed_, j));
  return dist_.lo + u * dist_.width();
}

double DisorderRealization::value(const Site& j) const {
  if (!box_.contains(j))
    throw PreconditionError("DisorderRealization::value: site outside potential box " + j.str());
  if (auto it = overrides_.find(j); it != overrides_.end()) return it->second;
  if (from_table_) {
    if (auto it = table_.find(j); it != table_.end()) return it->second;
  }
  return hashed_value(j);
}

void DisorderRealization::set_value(const Site& j, double v) {
  if (!box_.contains(j))
    throw PreconditionError("DisorderRealization::set_value: site outside potential box");
  overrides_[j] = v;
}

DisorderRealization DisorderRealization::with_overrides(std::span<const Site> sites,
                                                        std::span<const double> vals) const {
  if (sites.size() != vals.size())
    throw PreconditionError("with_overrides: size mismatch");
  DisorderRealization r = *this;
  for (std::size_t k = 0; k < sites.size(); ++k) r.set_value(sites[k], vals[k]);
  return r;
}

std::string DisorderRealization::serialize() const {
  std::ostringstream out;
  out << "# disorder realization\n";
  out << "# seed = " << seed_ << "\n";
  out << "# dist = uniform " << format_full(dist_.lo) << " " << format_full(dist_.hi) << "\n";
  out << "# axes = " << box_.axes() << "\n";
  out << "# center =";
  for (int i = 0; i < box_.axes(); ++i) out << " " << box_.center[i];
  out << "\n# radius =";
  for (int i = 0; i < box_.axes(); ++i) out << " " << box_.radius[static_cast<std::size_t>(i)];
  out << "\n";
  const std::int64_t n = box_.cardinality();
  for (std::int64_t i = 0; i < n; ++i) {
    const Site s = box_.site_at(i);
    for (int a = 0; a < s.axes(); ++a) out << s[a] << " ";
    out << format_full(value(s)) << "\n";
  }
  return out.str();
}

DisorderRealization DisorderRealization::deserialize(std::istream& in) {
  DisorderRealization r;
  std::string line;
  int axes = -1;
  Site center;
  std::vector<int> radii;
  bool have_seed = false, have_dist = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key, eq;
      ls >> key;
      if (key == "seed") {
        ls >> eq >> r.seed_;
        have_seed = true;
      } else if (key == "dist") {
        std::string kind;
        ls >> eq >> kind >> r.dist_.lo >> r.dist_.hi;
        if (kind != "uniform") throw ConfigError("disorder table: unknown distribution " + kind);
        have_dist = true;
      } else if (key == "axes") {
        ls >> eq >> axes;
      } else if (key == "center") {
        if (axes < 0) throw ConfigError("disorder table: center before axes");
        std::vector<int> c(static_cast<std::size_t>(axes));
        ls >> eq;
        for (int& v : c) ls >> v;
        center = Site(std::span<const int>(c));
      } else if (key == "radius") {
        if (axes < 0) throw ConfigError("disorder table: radius before axes");
        radii.assign(static_cast<std::size_t>(axes), 0);
        ls >> eq;
        for (int& v : radii) ls >> v;
      }
      continue;
    }
    if (axes < 0 || radii.empty() || !have_seed || !have_dist)
      throw ConfigError("disorder table: incomplete header before data");
    if (r.box_.axes() == 0) r.box_ = Box::around(center, radii);
    std::istringstream ls(line);
    std::vector<int> c(static_cast<std::size_t>(axes));
    for (int& v : c) ls >> v;
    double val = 0;
    ls >> val;
    if (!ls) throw ConfigError("disorder table: malformed row: " + line);
    r.table_[Site(std::span<const int>(c))] = val;
  }
  if (r.box_.axes() == 0) {
    if (axes < 0 || radii.empty()) throw ConfigError("disorder table: missing box header");
    r.box_ = Box::around(center, radii);
  }
  r.from_table_ = true;
  return r;
}

void DisorderRealization::save(const std::string& path) const {
  atomic_write_file(path, serialize());
}

DisorderRealization DisorderRealization::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open disorder table: " + path);
  return deserialize(in);
}

Eigen::MatrixXd SpatialOperator::matrix() const {
  const int n = index.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const Site& s = index[a];
    h(a, a) = pot->value(s);
    for (int ax = 0; ax < s.axes(); ++ax) {
      for (int step : {-1, +1}) {
        Site nb = s;
        nb[ax] += step;
        const int b = index.find(nb);
        if (b >= 0) h(a, b) = eps;
      }
    }
  }
  return h;
}

SpatialOperator assemble_H(double eps, const DisorderRealization& pot,
                           const ElementaryRegion& region) {
  if (eps < 0) throw PreconditionError("assemble_H: eps must be >= 0");
  SpatialOperator op;
  op.region = region;
  op.eps = eps;
  op.pot = &pot;
  op.index = RegionIndex(region);
  for (const Site& s : op.index.sites())
    if (!pot.covers(s))
      throw PreconditionError("assemble_H: region escapes potential box at " + s.str());
  return op;
}

std::pair<double, double> spectrum_bounds(double eps, const Distribution& dist, int d) {
  return {-2.0 * eps * d + dist.lo, 2.0 * eps * d + dist.hi};
}

}  // namespace qpdnls
