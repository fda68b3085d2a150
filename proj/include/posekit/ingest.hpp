#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"

namespace posekit {

// ---------------------------------------------------------------------------
// SfM text model (cameras.txt / images.txt / points3D.txt)

struct SfmCamera {
  int id = 0;
  std::string model;  // e.g. PINHOLE, OPENCV
  int width = 0, height = 0;
  std::vector<double> params;

  /// Throws UnknownCameraModel for models without a pinhole/Brown-Conrady
  /// equivalent.
  CameraIntrinsics intrinsics() const;

  bool operator==(const SfmCamera&) const = default;
};

struct SfmObservation {
  double x = 0, y = 0;
  std::int64_t point3d_id = -1;

  bool operator==(const SfmObservation&) const = default;
};

struct SfmImage {
  int id = 0;
  // World-to-camera record exactly as stored in the file.
  std::array<double, 4> qvec{1, 0, 0, 0};  // w, x, y, z
  std::array<double, 3> tvec{0, 0, 0};
  int camera_id = 0;
  std::string name;
  std::vector<SfmObservation> observations;

  /// Camera-to-world pose (R^T, -R^T t) of the stored record.
  Pose cam_in_world() const;
  /// Overwrites qvec/tvec from a camera-to-world pose.
  void set_cam_in_world(const Pose& p);

  bool operator==(const SfmImage&) const = default;
};

struct SfmTrackElement {
  int image_id = 0;
  int point2d_idx = 0;

  bool operator==(const SfmTrackElement&) const = default;
};

struct SfmPoint {
  std::int64_t id = 0;
  std::array<double, 3> xyz{};
  std::array<int, 3> rgb{};
  double error = 0;
  std::vector<SfmTrackElement> track;

  std::size_t track_length() const { return track.size(); }

  bool operator==(const SfmPoint&) const = default;
};

struct SfmModel {
  std::map<int, SfmCamera> cameras;
  std::vector<SfmImage> images;
  std::vector<SfmPoint> points;

  const SfmImage* find_image(const std::string& name) const;

  bool operator==(const SfmModel&) const = default;
};

SfmModel parse_sfm_text(const std::filesystem::path& dir);
void write_sfm_text(const SfmModel& model, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Trajectories: "timestamp tx ty tz qx qy qz qw", camera-to-world.

struct TrajectoryEntry {
  double timestamp = 0;
  Pose cam_in_world;
};

using Trajectory = std::vector<TrajectoryEntry>;

Trajectory parse_trajectory(const std::filesystem::path& file);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Geometry containers

using Rgb = std::array<std::uint8_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Rgb> colors;  // empty or one per vertex

  bool empty() const { return vertices.empty() || triangles.empty(); }
  double triangle_area(std::size_t i) const;
  /// Drops triangles with area <= min_area; returns how many were removed.
  std::size_t remove_degenerate(double min_area = 1e-12);
  /// Throws IndexOutOfRange on bad vertex references.
  void validate() const;
  std::pair<Vec3, Vec3> bounds() const;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;  // empty or one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Loads OBJ (v/f records) or PLY (ascii, binary_little_endian), chosen by
/// content. Degenerate triangles are removed after loading.
TriangleMesh parse_mesh(const std::filesystem::path& file);
/// Vertex element of a PLY file (faces, if any, are ignored), or the `v`
/// records of an OBJ.
PointCloud parse_point_cloud(const std::filesystem::path& file);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& file);
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& file,
               bool binary = false);
void write_ply(const PointCloud& cloud, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Images

struct Mask {
  int width = 0, height = 0;
  std::vector<float> values;  // row-major, in [0, 1]

  Mask() = default;
  Mask(int w, int h, float fill = 0.f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double foreground_area() const;
  bool any() const;
};

struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;  // meters, 0 = invalid

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

inline constexpr double kMillimeters = 1e-3;
inline constexpr double kDefaultMaskThreshold = 0.5;

/// 8-bit P5 graymap (or P6 pixmap, max channel). Values >= threshold become
/// 1 and the rest 0; pass std::nullopt to keep the raw [0, 1] values.
Mask parse_mask(const std::filesystem::path& file,
                std::optional<double> threshold = kDefaultMaskThreshold);
/// 16-bit big-endian P5 graymap; stored integers times `scale` give meters.
DepthMap parse_depth(const std::filesystem::path& file, double scale = kMillimeters);

void write_mask(const Mask& mask, const std::filesystem::path& file);
void write_depth(const DepthMap& depth, const std::filesystem::path& file,
                 double scale = kMillimeters);

/// Throws DimensionMismatch when an image does not match the intrinsics.
void check_dimensions(int width, int height, const CameraIntrinsics& k,
                      const std::string& what);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& file, const std::string& bytes);
std::string read_file(const std::filesystem::path& file);

}  // namespace posekit
