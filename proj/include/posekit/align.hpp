#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"

namespace posekit {

struct ViewSamplingParams {
  int count = 150;
  // Camera distance as a multiple of the bounding-sphere radius.
  double distance_min = 2.0;
  double distance_max = 4.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  double elevation_min_deg = 10.0;
  double elevation_max_deg = 70.0;
  std::uint64_t seed = 0;
};

/// Ground-truth poses (camera-to-object) of the rendered virtual views.
struct VirtualViewSet {
  std::vector<Pose> poses;
  ViewSamplingParams params;
  Vec3 center = Vec3::Zero();  // bounding-sphere center, object frame
  double radius = 0;

  /// "render_000.png" for index 0, and so on.
  static std::string image_name(std::size_t index);
  std::optional<std::size_t> index_of(const std::string& name) const;
};

/// Look-at cameras toward the mesh bounding-sphere center with +z up,
/// deterministic per params.seed.
VirtualViewSet sample_virtual_views(const TriangleMesh& mesh, const ViewSamplingParams& params);

/// Writes `<stem>.txt` (trajectory format, timestamp = view index) and
/// `<stem>.json` (sampling parameters and image-name mapping).
void write_virtual_views(const VirtualViewSet& views, const std::filesystem::path& stem);
/// Reads the JSON sidecar written by write_virtual_views; poses come from the
/// trajectory file it names.
VirtualViewSet read_virtual_views(const std::filesystem::path& json_file);

/// Least-squares similarity mapping src onto dst (Kabsch-Umeyama).
/// Throws Degenerate for (near-)collinear sources and Reflection when no
/// positive scale exists.
Similarity umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Eq. (R_s R, s R_s t + t_s): moves a camera-to-world pose into the
/// similarity's target frame. Scale only touches the translation.
Pose apply_similarity(const Pose& p, const Similarity& s);

struct PoseCorrespondence {
  std::string name;
  Pose estimated;  // SfM world frame
  Pose reference;  // object frame
};

struct RansacParams {
  double threshold = 0.02;  // meters, post-alignment center distance
  int max_iters = 2000;
  std::uint64_t seed = 0;
};

struct AlignmentReport {
  Similarity similarity;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  double rms_center_residual = 0;      // meters, inliers only
  double mean_rotation_residual = 0;   // radians, inliers only
  std::vector<double> center_residuals;  // per pair, meters
  int iterations = 0;
};

/// Robust 7-DOF alignment of camera centers: minimal samples of 3 pairs,
/// inlier test by post-alignment center distance, one refit on the largest
/// inlier set. Deterministic per seed. Throws InvalidArgument for fewer than
/// 3 pairs and NoConsensus when no hypothesis gathers 3 inliers.
AlignmentReport ransac_sim3(std::span<const PoseCorrespondence> pairs, const RansacParams& params);

struct TextureRichParams {
  RansacParams ransac;
  /// Optional quality gate on rendered views: views whose match count is
  /// below the minimum (or missing from the table) are not used.
  std::optional<int> min_match_count;
  std::map<std::string, int> match_counts;
};

struct TextureRichResult {
  std::map<std::string, Pose> cameras;  // real image name -> camera-to-object
  std::vector<std::string> unregistered;  // real images absent from the model
  std::vector<std::string> used_views;
  AlignmentReport report;
  Pose object_pose;  // always identity: the output frame is the object frame
};

/// Aligns SfM poses of the rendered views with their ground truth and moves
/// every real camera into the object frame.
TextureRichResult annotate_texture_rich(const SfmModel& model, const VirtualViewSet& views,
                                        const std::vector<std::string>& real_image_names,
                                        const TextureRichParams& params);

}  // namespace posekit
