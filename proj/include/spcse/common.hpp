#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spcse {

// Element type for all tensors. Shipping builds store 32-bit floats; the wide build
// exists so gradient checks can run the identical code in 64-bit, where float rounding
// no longer drowns the smallest mask derivatives. Checkpoints stay 32-bit either way.
#ifdef SPCSE_WIDE_REAL
using real = double;
#else
using real = float;
#endif
using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<real, 1, Eigen::Dynamic>;
using DMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorKind {
  Config,
  State,
  Data,
  Parse,
  Io,
  Input,
  Vocabulary,
  Dependency,
  Integrity,
  Compatibility,
  Shape,
  Numeric,
  Metric,
};

// Exit-code taxonomy: 0 success, 2 usage/config, 3 data/parse, 4 integrity/compatibility,
// 5 numeric failure.
int exit_code_for(ErrorKind kind);
const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return exit_code_for(kind_); }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

uint64_t splitmix64(uint64_t& state);

// Deterministic seed derivation for independent RNG streams.
uint64_t derive_seed(uint64_t base, uint64_t salt);
uint64_t derive_seed(uint64_t base, uint64_t salt_a, uint64_t salt_b);

// All distributions are hand-rolled on top of mt19937_64 (whose output sequence the
// standard pins down); std::*_distribution and std::shuffle are implementation-defined
// and would break cross-platform determinism.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1; rejection sampling to avoid modulo bias.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller (one value per draw).
  double normal();

  // Normal(0, sigma) resampled until within [-2 sigma, 2 sigma].
  double truncated_normal(double sigma);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level is read once from SPCSE_LOG (error|warn|info|debug); default warn.
LogLevel log_level();
void log(LogLevel level, const std::string& message);
inline void log_error(const std::string& m) { log(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::Debug, m); }

// Fixed-format float rendering used by every CSV/report writer so that identical values
// always serialize to identical bytes.
std::string format_real(double value);

// Shortest-safe form is not worth the portability fuss; 17 significant digits make any
// double survive a write/parse round trip bit-for-bit. Used where files feed later stages.
std::string format_exact(double value);

uint64_t fnv1a64(const void* data, size_t len);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Writes content to a temp file next to path, then renames over path, so an interrupted
// save never leaves a partially written artifact at the target name.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace spcse
