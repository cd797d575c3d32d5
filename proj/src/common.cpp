#include "spcse/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>

namespace spcse {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::State:
      return 2;
    case ErrorKind::Data:
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::Input:
    case ErrorKind::Vocabulary:
    case ErrorKind::Dependency:
      return 3;
    case ErrorKind::Integrity:
    case ErrorKind::Compatibility:
    case ErrorKind::Shape:
      return 4;
    case ErrorKind::Numeric:
    case ErrorKind::Metric:
      return 5;
  }
  return 1;
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::State: return "state";
    case ErrorKind::Data: return "data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Input: return "input";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::Dependency: return "dependency";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Compatibility: return "compatibility";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Metric: return "metric";
  }
  return "unknown";
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t salt) {
  uint64_t s = base;
  splitmix64(s);
  s ^= 0x632be59bd9b4e019ull ^ salt;
  return splitmix64(s);
}

uint64_t derive_seed(uint64_t base, uint64_t salt_a, uint64_t salt_b) {
  return derive_seed(derive_seed(base, salt_a), salt_b);
}

uint64_t Rng::uniform_int(uint64_t n) {
  if (n == 0) raise(ErrorKind::State, "uniform_int: n must be positive");
  if (n == 1) return 0;
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::truncated_normal(double sigma) {
  for (;;) {
    double z = normal();
    if (std::fabs(z) <= 2.0) return z * sigma;
  }
}

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("SPCSE_LOG");
    if (!env) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    std::fprintf(stderr, "[warn] SPCSE_LOG=%s not recognized; using warn\n", env);
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (int(level) > int(log_level())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[%s] %s\n", names[int(level)], message.c_str());
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot open " + tmp + " for writing");
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    raise(ErrorKind::Io, "cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return bool(in);
}

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace spcse
