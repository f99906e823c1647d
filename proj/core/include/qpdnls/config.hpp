#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpdnls/support.hpp"

namespace qpdnls {

/// Line-oriented "key = value" configuration with [section] headers.
/// '#' and ';' start comments. Keys are looked up as "section.key".
class Config {
public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      std::optional<std::string> fallback = std::nullopt) const;
  long get_int(const std::string& section, const std::string& key,
               std::optional<long> fallback = std::nullopt) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::optional<std::uint64_t> fallback = std::nullopt) const;
  double get_double(const std::string& section, const std::string& key,
                    std::optional<double> fallback = std::nullopt) const;
  bool get_bool(const std::string& section, const std::string& key,
                std::optional<bool> fallback = std::nullopt) const;
  /// Whitespace-separated doubles.
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  std::optional<std::vector<double>> fallback = std::nullopt) const;
  std::vector<int> get_ints(const std::string& section, const std::string& key,
                            std::optional<std::vector<int>> fallback = std::nullopt) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Canonical text (sorted sections/keys) used for manifests and digests.
  std::string snapshot() const;

private:
  std::map<std::string, std::map<std::string, std::string>> kv_;
  const std::string* find(const std::string& section, const std::string& key) const;
};

/// One content-addressed record of a run: configuration snapshot, code
/// version, timings and the digests of every emitted file.
class RunManifest {
public:
  RunManifest(std::string command, std::string config_snapshot);

  void set_status(std::string status) { status_ = std::move(status); }
  void add_timing(const std::string& name, double seconds);
  /// Registers an output file already written to disk; digests it.
  void add_output(const std::string& path);
  void set_wall_seconds(double s) { wall_seconds_ = s; }

  std::string render() const;
  void write(const std::string& path) const;
  const std::vector<std::pair<std::string, std::string>>& outputs() const { return outputs_; }

private:
  std::string command_;
  std::string config_;
  std::string status_ = "ok";
  double wall_seconds_ = 0;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::pair<std::string, std::string>> outputs_;  // path -> digest
};

/// CSV with "# key = value" metadata header lines.
class TableWriter {
public:
  explicit TableWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void meta(const std::string& key, const std::string& value);
  void meta(const std::string& key, double value);
  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& values);
  std::string render() const;

private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::string> rows_;
};

}  // namespace qpdnls
