#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/geometry.hpp"
#include "posekit/ingest.hpp"

namespace posekit {

using Json = nlohmann::json;

/// {"matrix": row-major 4x4, "quaternion": [qw, qx, qy, qz],
///  "translation": [tx, ty, tz]}. The matrix is authoritative when parsing.
Json pose_to_json(const Pose& p);
/// Accepts either form; throws InvalidArgument for invalid rigid transforms.
Pose pose_from_json(const Json& j);

Json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);

Json similarity_to_json(const Similarity& s);

enum class Provenance { TextureRich, Textureless };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct FrameRecord {
  int index = 0;
  std::string image;  // paths relative to the manifest directory
  std::string depth;
  std::string mask;
  std::optional<double> timestamp;

  bool operator==(const FrameRecord&) const = default;
};

struct RefinementRecord {
  int rounds = 0;
  double initial_loss = 0;
  double final_loss = 0;
  std::vector<int> frames;

  bool operator==(const RefinementRecord&) const = default;
};

struct Annotation {
  Pose object_pose;  // object-to-world
  Provenance provenance = Provenance::Textureless;
  std::vector<RefinementRecord> refinement_history;
  std::string updated_at;  // ISO-8601 UTC
};

inline constexpr int kManifestVersion = 1;

/// One scene on disk. Schema documented in docs/manifest.md.
struct SceneManifest {
  int version = kManifestVersion;
  std::string scene_id;
  CameraIntrinsics intrinsics;
  double depth_scale = kMillimeters;
  double mask_threshold = kDefaultMaskThreshold;
  double init_distance = 0.5;  // meters ahead of the first camera
  std::string mesh;
  std::optional<std::string> trajectory;
  std::optional<std::string> sfm_model;
  std::vector<FrameRecord> frames;
  std::optional<Annotation> annotation;

  std::filesystem::path base_dir;  // not serialized

  std::filesystem::path resolve(const std::string& relative) const {
    return base_dir / relative;
  }
};

Json manifest_to_json(const SceneManifest& m);
SceneManifest manifest_from_json(const Json& j);

/// Parses and validates a manifest; with `check_files`, every referenced
/// file must exist (MissingFile otherwise).
SceneManifest load_manifest(const std::filesystem::path& file, bool check_files = true);
/// Canonical serialization (sorted keys, shortest round-trip floats), written
/// atomically.
void save_manifest(const SceneManifest& m, const std::filesystem::path& file);
std::string dump_canonical(const Json& j);

/// Camera-to-world pose for each frame: trajectory entries are matched by
/// timestamp when frames carry one, by position otherwise; SfM images are
/// matched by the frame image's file name.
std::vector<std::optional<Pose>> frame_camera_poses(const SceneManifest& m);

std::string utc_timestamp();

}  // namespace posekit
