#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include <unistd.h>

#include "posekit/geometry.hpp"
#include "posekit/random.hpp"

namespace posekit::test {

inline constexpr double kPi = std::numbers::pi;
inline double deg(double d) { return d * kPi / 180.0; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "posekit") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Vec3 random_unit(SplitMix64& rng) {
  for (;;) {
    Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

inline Mat3 random_rotation(SplitMix64& rng) {
  return axis_angle(random_unit(rng), rng.uniform(0, 3.0));
}

inline Pose random_pose(SplitMix64& rng, double extent = 2.0) {
  return {random_rotation(rng),
          Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
               rng.uniform(-extent, extent))};
}

}  // namespace posekit::test
