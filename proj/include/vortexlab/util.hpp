#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vortexlab {

constexpr double PI = 3.14159265358979323846;
constexpr double TWO_PI = 2.0 * PI;

using cplx = std::complex<double>;

// ---- logging ------------------------------------------------------------

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from VORTEXLAB_LOG (error|warn|info|debug), read once.
LogLevel log_level();
void log_msg(LogLevel lvl, const std::string& msg);

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

// ---- errors -------------------------------------------------------------

// Invalid input (bad config, malformed mesh, inconsistent vortex data).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A solver or iteration failed to reach its tolerance.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- numeric helpers ----------------------------------------------------

// Wrap to (-pi, pi].
inline double principal_angle(double a) {
  a = std::fmod(a, TWO_PI);
  if (a <= -PI) a += TWO_PI;
  if (a > PI) a -= TWO_PI;
  return a;
}

// Distance from a to the nearest multiple of 2*pi.
inline double dist_to_2pi_lattice(double a) {
  return std::abs(principal_angle(a));
}

// Fractional part in [0, 1).
inline double frac(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f = 0.0;  // guards against floor rounding at negative epsilons
  return f;
}

// Wrap a coordinate difference to [-1/2, 1/2).
inline double wrap_half(double d) {
  d -= std::round(d);
  if (d >= 0.5) d -= 1.0;
  if (d < -0.5) d += 1.0;
  return d;
}

// Compensated accumulation; the structural identities checked at 1e-10
// (Gauss-Bonnet sums over ~1e5 corners) need better than naive summation.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

// ---- hashing ------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t h);

// ---- formatting ---------------------------------------------------------

// 17 significant digits round-trips IEEE doubles exactly.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// One CSV file: header fixed at construction, rows formatted with fmt_g17.
class CsvWriter {
 public:
  // When `comment` is nonempty a "# <comment>" line precedes the header,
  // so output files can carry provenance (e.g. a config hash) in-band.
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const std::string& comment = "");
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  // Mixed row: strings written verbatim (labels, hashes).
  void row_mixed(const std::vector<std::string>& cells);
  void close();

 private:
  std::FILE* f_ = nullptr;
  std::size_t ncols_;
  std::string path_;
};

// ---- rng ----------------------------------------------------------------

// All stochastic choices in the library flow through one seeded engine per
// operation, so runs with equal seeds are bit-identical.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace vortexlab
