#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <adafuse/fusion.hpp>
#include <adafuse/numerics.hpp>
#include <adafuse/rng.hpp>

namespace adafuse::test {

inline Vector random_unit(Rng& rng, std::size_t d) {
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) {
    v[i] = static_cast<real>(rng.gaussian());
  }
  return l2_normalize(v);
}

inline FusionParams random_params(const FusionConfig& config, Rng& rng,
                                  double scale = 0.2) {
  FusionParams params = FusionParams::zeros(config);
  for (auto& t : params.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      t.data[i] = static_cast<real>(rng.uniform(-scale, scale));
    }
  }
  return params;
}

// Unique per-process scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

} // namespace adafuse::test
