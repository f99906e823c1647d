#include "qpdnls/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qpdnls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      cfg.kv_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.kv_[section][key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
  auto sit = kv_.find(section);
  if (sit == kv_.end()) return nullptr;
  auto kit = sit->second.find(key);
  return kit == sit->second.end() ? nullptr : &kit->second;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            std::optional<std::string> fallback) const {
  if (const std::string* v = find(section, key)) return *v;
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

long Config::get_int(const std::string& section, const std::string& key,
                     std::optional<long> fallback) const {
  if (const std::string* v = find(section, key)) {
    try {
      std::size_t pos = 0;
      const long r = std::stol(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw ConfigError("config key [" + section + "] " + key + ": not an integer: " + *v);
    }
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::optional<std::uint64_t> fallback) const {
  if (const std::string* v = find(section, key)) {
    try {
      std::size_t pos = 0;
      const std::uint64_t r = std::stoull(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw ConfigError("config key [" + section + "] " + key + ": not an unsigned integer: " + *v);
    }
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

double Config::get_double(const std::string& section, const std::string& key,
                          std::optional<double> fallback) const {
  if (const std::string* v = find(section, key)) {
    try {
      std::size_t pos = 0;
      const double r = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw ConfigError("config key [" + section + "] " + key + ": not a number: " + *v);
    }
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      std::optional<bool> fallback) const {
  if (const std::string* v = find(section, key)) {
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key [" + section + "] " + key + ": not a boolean: " + *v);
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        std::optional<std::vector<double>> fallback) const {
  if (const std::string* v = find(section, key)) {
    std::vector<double> out;
    std::istringstream ss(*v);
    double x;
    while (ss >> x) out.push_back(x);
    if (!ss.eof())
      throw ConfigError("config key [" + section + "] " + key + ": not a number list: " + *v);
    return out;
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

std::vector<int> Config::get_ints(const std::string& section, const std::string& key,
                                  std::optional<std::vector<int>> fallback) const {
  if (const std::string* v = find(section, key)) {
    std::vector<int> out;
    std::istringstream ss(*v);
    int x;
    while (ss >> x) out.push_back(x);
    if (!ss.eof())
      throw ConfigError("config key [" + section + "] " + key + ": not an integer list: " + *v);
    return out;
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key [" + section + "] " + key);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  kv_[section][key] = value;
}

std::string Config::snapshot() const {
  std::ostringstream out;
  for (const auto& [section, keys] : kv_) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
  }
  return out.str();
}

RunManifest::RunManifest(std::string command, std::string config_snapshot)
    : command_(std::move(command)), config_(std::move(config_snapshot)) {}

void RunManifest::add_timing(const std::string& name, double seconds) {
  timings_.push_back({name, seconds});
}

void RunManifest::add_output(const std::string& path) {
  outputs_.push_back({path, file_digest(path)});
}

std::string RunManifest::render() const {
  std::ostringstream out;
  out << "# run manifest\n";
  out << "command = " << command_ << "\n";
  out << "version = " << QPDNLS_VERSION << "\n";
  out << "status = " << status_ << "\n";
  out << "wall_seconds = " << format_full(wall_seconds_) << "\n";
  out << "config_digest = ";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_)));
  out << buf << "\n";
  out << "[timings]\n";
  for (const auto& [name, sec] : timings_) out << name << " = " << format_full(sec) << "\n";
  out << "[outputs]\n";
  for (const auto& [path, digest] : outputs_) out << path << " = " << digest << "\n";
  out << "[config]\n" << config_;
  return out.str();
}

void RunManifest::write(const std::string& path) const { atomic_write_file(path, render()); }

void TableWriter::meta(const std::string& key, const std::string& value) {
  meta_.push_back({key, value});
}

void TableWriter::meta(const std::string& key, double value) {
  meta_.push_back({key, format_full(value)});
}

void TableWriter::row(const std::vector<double>& values) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) ss << ",";
    ss << format_full(values[i]);
  }
  rows_.push_back(ss.str());
}

void TableWriter::row_mixed(const std::vector<std::string>& values) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) ss << ",";
    ss << values[i];
  }
  rows_.push_back(ss.str());
}

std::string TableWriter::render() const {
  std::ostringstream out;
  for (const auto& [k, v] : meta_) out << "# " << k << " = " << v << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out << ",";
    out << columns_[i];
  }
  out << "\n";
  for (const std::string& r : rows_) out << r << "\n";
  return out.str();
}

}  // namespace qpdnls
