#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gp {

// Categories double as CLI exit codes and C API status values.
enum class ErrorKind : int {
  usage = 1,
  data = 2,
  numeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GP_DECLARE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  }

GP_DECLARE_ERROR(ParseError, data);
GP_DECLARE_ERROR(ShapeError, data);
GP_DECLARE_ERROR(GapError, data);
GP_DECLARE_ERROR(DegeneratePoseError, data);
GP_DECLARE_ERROR(TooShortError, data);
GP_DECLARE_ERROR(InvalidAnnotationError, data);
GP_DECLARE_ERROR(ConnectivityError, data);
GP_DECLARE_ERROR(IoError, data);
GP_DECLARE_ERROR(CompatibilityError, data);
GP_DECLARE_ERROR(DomainError, numeric);
GP_DECLARE_ERROR(DivergenceError, numeric);
GP_DECLARE_ERROR(RangeError, usage);
GP_DECLARE_ERROR(ContractError, usage);
GP_DECLARE_ERROR(LengthError, usage);
GP_DECLARE_ERROR(SizeError, usage);
GP_DECLARE_ERROR(ConfigError, usage);

#undef GP_DECLARE_ERROR

/// 64-bit FNV-1a, used for config and graph fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator with distribution helpers that do not depend on the
/// standard library's implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

  /// Independent stream keyed by (seed, a, b).
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(splitmix64(splitmix64(seed ^ 0x5851f42d4c957f2dULL) + a) ^ splitmix64(b + 0x14057b7ef767814fULL));
  }

  std::uint64_t next_u64() {
    // xorshift64* over a splitmix-seeded state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw RangeError("Rng::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(6.283185307179586 * u2);
    has_spare_ = true;
    return r * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
/// concurrency). Callers must write results to per-index slots only.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace gp
