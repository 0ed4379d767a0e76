#ifndef SIMT_TESTS_SUPPORT_HPP
#define SIMT_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "simt/device.hpp"

namespace simt::test {

/// A context configured from SIMT_WORKERS / SIMT_SCHEDULE / SIMT_SEED, so
/// every suite runs under whatever schedule ctest selected.
inline Context env_context(ContextConfig base = {}) {
  return create_context(0, config_from_environment(process_environment(), base));
}

/// A fresh empty directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "simt-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Seeded host data generators.
inline std::vector<float> random_f32(std::uint64_t seed, std::size_t n, float lo = -1, float hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

inline std::vector<double> random_f64(std::uint64_t seed, std::size_t n, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::vector<std::int32_t> random_i32(std::uint64_t seed, std::size_t n, std::int32_t lo = -1000,
                                            std::int32_t hi = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int32_t> d(lo, hi);
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace simt::test

#endif  // SIMT_TESTS_SUPPORT_HPP
