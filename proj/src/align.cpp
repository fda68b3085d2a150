#include "posekit/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include <Eigen/SVD>

#include "posekit/error.hpp"
#include "posekit/manifest.hpp"
#include "posekit/random.hpp"

namespace posekit {

namespace fs = std::filesystem;

std::string VirtualViewSet::image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "render_%03zu.png", index);
  return buf;
}

std::optional<std::size_t> VirtualViewSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (image_name(i) == name) return i;
  }
  return std::nullopt;
}

VirtualViewSet sample_virtual_views(const TriangleMesh& mesh, const ViewSamplingParams& params) {
  if (mesh.vertices.empty()) throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: empty mesh");
  if (params.count < 3) throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: count must be >= 3");
  if (!(params.distance_min > 0) || params.distance_max < params.distance_min) {
    throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: bad distance range");
  }
  if (params.azimuth_max_deg < params.azimuth_min_deg ||
      params.elevation_max_deg < params.elevation_min_deg) {
    throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: inverted angle range");
  }
  if (params.elevation_min_deg <= -90.0 || params.elevation_max_deg >= 90.0) {
    throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: elevation must lie in (-90, 90)");
  }

  VirtualViewSet views;
  views.params = params;
  const auto [lo, hi] = mesh.bounds();
  views.center = 0.5 * (lo + hi);
  for (const auto& v : mesh.vertices) views.radius = std::max(views.radius, (v - views.center).norm());
  if (!(views.radius > 0)) throw Error(ErrorCode::InvalidArgument, "sample_virtual_views: mesh has no extent");

  constexpr double kDeg = std::numbers::pi / 180.0;
  views.poses.reserve(params.count);
  for (int i = 0; i < params.count; ++i) {
    SplitMix64 rng = SplitMix64::keyed(params.seed, static_cast<std::uint64_t>(i));
    const double az = rng.uniform(params.azimuth_min_deg, params.azimuth_max_deg) * kDeg;
    const double el = rng.uniform(params.elevation_min_deg, params.elevation_max_deg) * kDeg;
    const double dist = rng.uniform(params.distance_min, params.distance_max) * views.radius;
    const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    views.poses.push_back(look_at(views.center + dist * dir, views.center, Vec3::UnitZ()));
  }
  return views;
}

void write_virtual_views(const VirtualViewSet& views, const fs::path& stem) {
  fs::path traj_file = stem;
  traj_file += ".txt";
  fs::path json_file = stem;
  json_file += ".json";
  Trajectory traj;
  for (std::size_t i = 0; i < views.poses.size(); ++i) {
    traj.push_back({static_cast<double>(i), views.poses[i]});
  }
  write_trajectory(traj, traj_file);

  const auto& p = views.params;
  Json images = Json::array();
  for (std::size_t i = 0; i < views.poses.size(); ++i) {
    images.push_back({{"index", i}, {"name", VirtualViewSet::image_name(i)}});
  }
  const Json j{{"trajectory", traj_file.filename().string()},
               {"center", {views.center.x(), views.center.y(), views.center.z()}},
               {"radius", views.radius},
               {"params",
                {{"count", p.count},
                 {"distance_min", p.distance_min},
                 {"distance_max", p.distance_max},
                 {"azimuth_min_deg", p.azimuth_min_deg},
                 {"azimuth_max_deg", p.azimuth_max_deg},
                 {"elevation_min_deg", p.elevation_min_deg},
                 {"elevation_max_deg", p.elevation_max_deg},
                 {"seed", p.seed}}},
               {"images", images}};
  write_file_atomic(json_file, dump_canonical(j));
}

VirtualViewSet read_virtual_views(const fs::path& json_file) {
  Json j;
  try {
    j = Json::parse(read_file(json_file));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ErrorCode::MalformedLine, json_file.string(), 0, e.what());
  }
  VirtualViewSet views;
  try {
    const Json& p = j.at("params");
    views.params.count = p.at("count").get<int>();
    views.params.distance_min = p.at("distance_min").get<double>();
    views.params.distance_max = p.at("distance_max").get<double>();
    views.params.azimuth_min_deg = p.at("azimuth_min_deg").get<double>();
    views.params.azimuth_max_deg = p.at("azimuth_max_deg").get<double>();
    views.params.elevation_min_deg = p.at("elevation_min_deg").get<double>();
    views.params.elevation_max_deg = p.at("elevation_max_deg").get<double>();
    views.params.seed = p.at("seed").get<std::uint64_t>();
    const Json& c = j.at("center");
    views.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    views.radius = j.at("radius").get<double>();
    const Trajectory traj =
        parse_trajectory(json_file.parent_path() / j.at("trajectory").get<std::string>());
    for (const auto& e : traj) views.poses.push_back(e.cam_in_world);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ErrorCode::MalformedLine, json_file.string(), 0, e.what());
  }
  return views;
}

Similarity umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::InvalidArgument, "umeyama_align: point sets differ in size");
  }
  if (src.size() < 3) throw Error(ErrorCode::InvalidArgument, "umeyama_align: need at least 3 points");
  const double n = static_cast<double>(src.size());

  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Mat3 cov = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  double var_s = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s;
    const Vec3 b = dst[i] - mu_d;
    cov += b * a.transpose();
    scatter += a * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= n;
  scatter /= n;
  var_s /= n;

  // Three points are always coplanar, so rank 2 is the requirement: the
  // second singular value decides collinearity.
  const Eigen::Vector3d sv_src = Eigen::JacobiSVD<Mat3>(scatter).singularValues();
  if (!(sv_src(0) > 0) || sv_src(1) < 1e-12 * sv_src(0)) {
    throw Error(ErrorCode::Degenerate, "umeyama_align: source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (!(d(0) > 0) || d(1) < 1e-12 * d(0)) {
    throw Error(ErrorCode::Degenerate, "umeyama_align: cross-covariance has rank < 2");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Eigen::Vector3d s(1, 1, 1);
  if (u.determinant() * v.determinant() < 0) s(2) = -1;

  Similarity out;
  out.rotation = u * s.asDiagonal() * v.transpose();
  out.scale = d.dot(s) / var_s;
  if (!(out.scale > 0)) {
    throw Error(ErrorCode::Reflection, "umeyama_align: no positive scale aligns the point sets");
  }
  out.translation = mu_d - out.scale * (out.rotation * mu_s);
  return out;
}

Pose apply_similarity(const Pose& p, const Similarity& s) {
  return {s.rotation * p.rotation, s.scale * (s.rotation * p.translation) + s.translation};
}

namespace {

struct Hypothesis {
  Similarity sim;
  std::vector<bool> inliers;
  std::size_t count = 0;
};

Hypothesis score(const Similarity& sim, std::span<const Vec3> src, std::span<const Vec3> dst,
                 double threshold) {
  Hypothesis h{sim, std::vector<bool>(src.size(), false), 0};
  for (std::size_t i = 0; i < src.size(); ++i) {
    if ((sim * src[i] - dst[i]).norm() < threshold) {
      h.inliers[i] = true;
      ++h.count;
    }
  }
  return h;
}

Similarity fit_subset(std::span<const Vec3> src, std::span<const Vec3> dst,
                      const std::vector<bool>& mask) {
  std::vector<Vec3> a, b;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (mask[i]) {
      a.push_back(src[i]);
      b.push_back(dst[i]);
    }
  }
  return umeyama_align(a, b);
}

}  // namespace

AlignmentReport ransac_sim3(std::span<const PoseCorrespondence> pairs, const RansacParams& params) {
  const std::size_t n = pairs.size();
  if (n < 3) throw Error(ErrorCode::InvalidArgument, "ransac_sim3: need at least 3 correspondences");
  if (!(params.threshold > 0)) throw Error(ErrorCode::InvalidArgument, "ransac_sim3: threshold must be positive");
  std::set<std::string> names;
  for (const auto& p : pairs) {
    if (!names.insert(p.name).second) {
      throw Error(ErrorCode::InvalidArgument, "ransac_sim3: duplicate correspondence name " + p.name);
    }
  }

  std::vector<Vec3> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].estimated.translation;
    dst[i] = pairs[i].reference.translation;
  }

  Hypothesis best;
  int iterations = 0;
  for (int it = 0; it < params.max_iters; ++it) {
    iterations = it + 1;
    SplitMix64 rng = SplitMix64::keyed(params.seed, static_cast<std::uint64_t>(it));
    std::size_t idx[3];
    idx[0] = rng.below(n);
    do idx[1] = rng.below(n); while (idx[1] == idx[0]);
    do idx[2] = rng.below(n); while (idx[2] == idx[0] || idx[2] == idx[1]);
    const Vec3 a[3] = {src[idx[0]], src[idx[1]], src[idx[2]]};
    const Vec3 b[3] = {dst[idx[0]], dst[idx[1]], dst[idx[2]]};
    Similarity sim;
    try {
      sim = umeyama_align(a, b);
    } catch (const Error&) {
      continue;
    }
    Hypothesis h = score(sim, src, dst, params.threshold);
    if (h.count > best.count) best = std::move(h);
    if (best.count == n) break;
  }
  if (best.count < 3) {
    throw Error(ErrorCode::NoConsensus, "ransac_sim3: no hypothesis with at least 3 inliers");
  }

  Hypothesis final_h = best;
  try {
    Hypothesis refit = score(fit_subset(src, dst, best.inliers), src, dst, params.threshold);
    if (refit.count >= 3) final_h = std::move(refit);
  } catch (const Error&) {
    // Keep the minimal-sample model when the inlier set cannot be refit.
  }

  AlignmentReport report;
  report.similarity = final_h.sim;
  report.inliers = final_h.inliers;
  report.inlier_count = final_h.count;
  report.iterations = iterations;
  report.center_residuals.resize(n);
  double sq = 0, rot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    report.center_residuals[i] = (final_h.sim * src[i] - dst[i]).norm();
    if (!final_h.inliers[i]) continue;
    sq += report.center_residuals[i] * report.center_residuals[i];
    rot += rotation_angle_between(apply_similarity(pairs[i].estimated, final_h.sim).rotation,
                                  pairs[i].reference.rotation);
  }
  report.rms_center_residual = std::sqrt(sq / final_h.count);
  report.mean_rotation_residual = rot / final_h.count;
  return report;
}

TextureRichResult annotate_texture_rich(const SfmModel& model, const VirtualViewSet& views,
                                        const std::vector<std::string>& real_image_names,
                                        const TextureRichParams& params) {
  std::vector<PoseCorrespondence> pairs;
  TextureRichResult result;
  for (std::size_t i = 0; i < views.poses.size(); ++i) {
    const std::string name = VirtualViewSet::image_name(i);
    if (params.min_match_count) {
      const auto it = params.match_counts.find(name);
      if (it == params.match_counts.end() || it->second < *params.min_match_count) continue;
    }
    const SfmImage* img = model.find_image(name);
    if (!img) continue;
    pairs.push_back({name, img->cam_in_world(), views.poses[i]});
    result.used_views.push_back(name);
  }
  if (pairs.size() < 3) {
    throw Error(ErrorCode::InsufficientRegistration,
                "annotate_texture_rich: only " + std::to_string(pairs.size()) +
                    " virtual views registered in the SfM model (need 3)");
  }
  result.report = ransac_sim3(pairs, params.ransac);
  for (const auto& name : real_image_names) {
    const SfmImage* img = model.find_image(name);
    if (!img) {
      result.unregistered.push_back(name);
      continue;
    }
    result.cameras[name] = apply_similarity(img->cam_in_world(), result.report.similarity);
  }
  return result;
}

}  // namespace posekit
