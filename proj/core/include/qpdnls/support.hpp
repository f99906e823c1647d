#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qpdnls {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Thrown when a caller violates a documented precondition.
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on malformed configuration input.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 mixer; the basis of all per-site keyed randomness.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0,1) from a 64-bit key (53 mantissa bits).
inline double key_to_unit(std::uint64_t key) noexcept {
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

/// FNV-1a over bytes; used for output digests and named sub-streams.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives a deterministic sub-stream seed from a global seed and a name.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) noexcept {
  return splitmix64(seed ^ fnv1a64(name));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t count = 0;
};

/// Ordinary least squares y = slope*x + intercept.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Runs fn(i) for i in [0,n) on up to `threads` workers. Exceptions from
/// workers are rethrown on the caller thread.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Writes `content` to `path` atomically (temp file in the same directory,
/// then rename).
void atomic_write_file(const std::string& path, const std::string& content);

/// FNV-1a digest of a file's bytes, rendered as 16 hex digits.
std::string file_digest(const std::string& path);

/// Full-precision rendering of a double (round-trips exactly).
std::string format_full(double v);

}  // namespace qpdnls
