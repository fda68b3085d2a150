#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"

namespace posekit {

/// Dense voxel grid of truncated signed distances. Voxel (i, j, k) has its
/// center at origin + voxel_size * (i, j, k); storage is x-fastest.
class TsdfVolume {
 public:
  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation);

  /// Smallest grid whose voxel centers cover [lo, hi].
  static TsdfVolume covering(const Vec3& lo, const Vec3& hi, double voxel_size, double truncation,
                             std::size_t max_voxels = std::size_t{1} << 27);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double truncation() const { return trunc_; }
  std::size_t size() const { return tsdf_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Vec3 center(int i, int j, int k) const { return origin_ + voxel_ * Vec3(i, j, k); }
  double tsdf(int i, int j, int k) const { return tsdf_[index(i, j, k)]; }
  double weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }

  const std::vector<double>& tsdf_values() const { return tsdf_; }
  const std::vector<double>& weights() const { return weight_; }

  /// Projective update from one depth frame: voxels whose signed distance
  /// along the ray exceeds -truncation take a unit-weight running average of
  /// sdf / truncation, clamped to [-1, 1].
  void integrate(const DepthMap& depth, const Pose& cam_in_world, const CameraIntrinsics& k);

  bool operator==(const TsdfVolume&) const = default;

 private:
  friend TsdfVolume load_volume(const std::filesystem::path& file);

  Vec3 origin_ = Vec3::Zero();
  double voxel_ = 0;
  std::array<int, 3> dims_{0, 0, 0};
  double trunc_ = 0;
  std::vector<double> tsdf_;
  std::vector<double> weight_;
};

/// One point per sign change between axis neighbors that both carry weight,
/// placed by linear interpolation of the two values.
PointCloud extract_points(const TsdfVolume& volume);

struct FusionParams {
  double voxel_size = 0.008;
  double truncation_voxels = 4;
  std::optional<std::pair<Vec3, Vec3>> region;  // extra axis-aligned bounds, world frame
  double max_depth = 0;                          // ignore depths beyond this, 0 = no limit
};

struct DepthFrame {
  DepthMap depth;
  Pose cam_in_world;
};

/// Axis-aligned bounds of the observed surface (valid depth back-projected
/// through each camera), widened by `margin`.
std::pair<Vec3, Vec3> observed_bounds(const std::vector<DepthFrame>& frames, const CameraIntrinsics& k,
                                      double margin, double max_depth = 0);

/// Builds a volume over the observed bounds (united with params.region) and
/// integrates every frame in order.
TsdfVolume fuse_frames(const std::vector<DepthFrame>& frames, const CameraIntrinsics& k,
                       const FusionParams& params = {});

/// One JSON header line, then tsdf and weight arrays as little-endian doubles.
void save_volume(const TsdfVolume& volume, const std::filesystem::path& file);
TsdfVolume load_volume(const std::filesystem::path& file);

}  // namespace posekit
