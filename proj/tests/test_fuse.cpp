#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include <Eigen/SVD>

#include "posekit/error.hpp"
#include "posekit/fuse.hpp"
#include "support.hpp"

using namespace posekit;
using namespace posekit::test;

namespace {

void require_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    FAIL("expected error ", to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

const CameraIntrinsics kCam(150, 150, 79.5, 59.5, 160, 120);

DepthMap plane_depth(double z) { return DepthMap(kCam.width, kCam.height, z); }

// Ray-cast z-depth of a sphere; 0 where the ray misses.
DepthMap sphere_depth(const Vec3& center, double radius, const Pose& cam) {
  DepthMap d(kCam.width, kCam.height);
  const Vec3 c = inverse(cam) * center;
  for (int v = 0; v < kCam.height; ++v) {
    for (int u = 0; u < kCam.width; ++u) {
      const Vec3 dir((u - kCam.cx) / kCam.fx, (v - kCam.cy) / kCam.fy, 1.0);
      const double a = dir.squaredNorm(), b = -2 * dir.dot(c), cc = c.squaredNorm() - radius * radius;
      const double disc = b * b - 4 * a * cc;
      if (disc < 0) continue;
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      if (t > 0) d.at(u, v) = t;
    }
  }
  return d;
}

TsdfVolume plane_volume() {
  return TsdfVolume::covering(Vec3(-0.1, -0.08, 0.9), Vec3(0.1, 0.08, 1.1), 0.005, 0.02);
}

std::vector<Pose> sphere_rig(const Vec3& center, int n) {
  std::vector<Pose> cams;
  for (int i = 0; i < n; ++i) {
    const double az = 2 * kPi * i / n, el = deg(i % 3 == 0 ? -30 : i % 3 == 1 ? 10 : 50);
    const Vec3 eye = center + 0.6 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    cams.push_back(look_at(eye, center, Vec3::UnitZ()));
  }
  return cams;
}

}  // namespace

TEST_CASE("plane zero crossing sits at the planted depth") {
  TsdfVolume vol = plane_volume();
  vol.integrate(plane_depth(1.0), Pose::identity(), kCam);
  const auto& d = vol.dims();
  int columns = 0;
  for (int y = 0; y < d[1]; ++y) {
    for (int x = 0; x < d[0]; ++x) {
      for (int z = 0; z + 1 < d[2]; ++z) {
        if (!(vol.weight(x, y, z) > 0 && vol.weight(x, y, z + 1) > 0)) continue;
        const double a = vol.tsdf(x, y, z), b = vol.tsdf(x, y, z + 1);
        if ((a < 0) == (b < 0)) continue;
        const double zc = vol.center(x, y, z).z() + 0.005 * a / (a - b);
        CHECK(std::abs(zc - 1.0) <= 0.0025);
        ++columns;
      }
    }
  }
  CHECK(columns == d[0] * d[1]);
  for (double v : vol.tsdf_values()) CHECK((v >= -1 && v <= 1));
}

TEST_CASE("repeated and empty frames") {
  TsdfVolume once = plane_volume();
  once.integrate(plane_depth(1.0), Pose::identity(), kCam);
  TsdfVolume twice = once;
  twice.integrate(plane_depth(1.0), Pose::identity(), kCam);
  CHECK(twice.tsdf_values() == once.tsdf_values());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice.weights()[i] == 2 * once.weights()[i]);

  TsdfVolume untouched = once;
  untouched.integrate(plane_depth(0.0), Pose::identity(), kCam);
  CHECK(untouched == once);
  require_code(ErrorCode::InvalidArgument,
               [&] { untouched.integrate(DepthMap(10, 10, 1.0), Pose::identity(), kCam); });
}

TEST_CASE("extracted plane points are coplanar") {
  TsdfVolume vol = plane_volume();
  vol.integrate(plane_depth(1.0), Pose::identity(), kCam);
  const PointCloud cloud = extract_points(vol);
  REQUIRE(cloud.size() > 100);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : cloud.points) {
    CHECK(std::abs(p.z() - 1.0) <= 0.005);
    mean += p;
  }
  mean /= static_cast<double>(cloud.size());
  Eigen::MatrixXd centered(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) centered.row(i) = (cloud.points[i] - mean).transpose();
  const Vec3 normal = Eigen::JacobiSVD<Eigen::MatrixXd>(centered, Eigen::ComputeThinV).matrixV().col(2);
  CHECK(std::acos(std::min(1.0, std::abs(normal.z()))) < deg(2));

  CHECK(extract_points(plane_volume()).empty());
}

TEST_CASE("sphere fusion from twelve views") {
  const Vec3 center(0.02, -0.01, 0.03);
  const double radius = 0.1;
  std::vector<DepthFrame> frames;
  for (const Pose& cam : sphere_rig(center, 12)) frames.push_back({sphere_depth(center, radius, cam), cam});
  FusionParams params;
  params.voxel_size = 0.005;
  const TsdfVolume vol = fuse_frames(frames, kCam, params);
  const PointCloud cloud = extract_points(vol);
  REQUIRE(cloud.size() > 1000);
  std::size_t close = 0;
  const Vec3 lo = vol.origin();
  const Vec3 hi = vol.center(vol.dims()[0] - 1, vol.dims()[1] - 1, vol.dims()[2] - 1);
  for (const auto& p : cloud.points) {
    if (std::abs((p - center).norm() - radius) <= 1.5 * params.voxel_size) ++close;
    CHECK((p.array() >= lo.array()).all());
    CHECK((p.array() <= hi.array()).all());
  }
  CHECK(static_cast<double>(close) >= 0.95 * static_cast<double>(cloud.size()));
}

TEST_CASE("integration order does not matter") {
  const Vec3 center(0, 0, 0);
  const auto cams = sphere_rig(center, 3);
  const DepthMap a = sphere_depth(center, 0.1, cams[0]);
  const DepthMap b = sphere_depth(center, 0.1, cams[1]);
  TsdfVolume ab = TsdfVolume::covering(Vec3::Constant(-0.15), Vec3::Constant(0.15), 0.006, 0.024);
  TsdfVolume ba = ab;
  ab.integrate(a, cams[0], kCam);
  const std::vector<double> w_before = ab.weights();
  ab.integrate(b, cams[1], kCam);
  ba.integrate(b, cams[1], kCam);
  ba.integrate(a, cams[0], kCam);
  double worst = 0;
  for (std::size_t i = 0; i < ab.size(); ++i) {
    worst = std::max(worst, std::abs(ab.tsdf_values()[i] - ba.tsdf_values()[i]));
    CHECK(ab.weights()[i] == ba.weights()[i]);
    CHECK(ab.weights()[i] >= w_before[i]);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("volume file round trip") {
  TempDir dir;
  const Vec3 center(0, 0, 0);
  const auto cams = sphere_rig(center, 2);
  TsdfVolume vol = TsdfVolume::covering(Vec3::Constant(-0.12), Vec3::Constant(0.12), 0.01, 0.04);
  vol.integrate(sphere_depth(center, 0.1, cams[0]), cams[0], kCam);
  save_volume(vol, dir / "v.tsdf");
  CHECK(load_volume(dir / "v.tsdf") == vol);

  std::string bytes;
  {
    std::ifstream in(dir / "v.tsdf", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir / "short.tsdf", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 3);
  }
  require_code(ErrorCode::MalformedLine, [&] { load_volume(dir / "short.tsdf"); });
  {
    std::ofstream out(dir / "long.tsdf", std::ios::binary);
    out << bytes << "xx";
  }
  require_code(ErrorCode::TrailingGarbage, [&] { load_volume(dir / "long.tsdf"); });
  require_code(ErrorCode::MissingFile, [&] { load_volume(dir / "absent.tsdf"); });
}

TEST_CASE("volume bounds and parameters") {
  const auto v = TsdfVolume::covering(Vec3(0, 0, 0), Vec3(0.1, 0.05, 0.0), 0.01, 0.04);
  CHECK(v.dims() == std::array<int, 3>{11, 6, 1});
  CHECK((v.center(10, 5, 0) - Vec3(0.1, 0.05, 0)).norm() < 1e-12);
  require_code(ErrorCode::InvalidArgument,
               [] { TsdfVolume::covering(Vec3::Zero(), Vec3::Constant(100), 0.001, 0.004); });
  require_code(ErrorCode::InvalidArgument, [] { TsdfVolume(Vec3::Zero(), 0, {1, 1, 1}, 1); });
  require_code(ErrorCode::InvalidArgument, [] { fuse_frames({}, kCam); });

  // Region of interest widens the observed bounds.
  FusionParams params;
  params.voxel_size = 0.01;
  params.region = std::make_pair(Vec3(-1, -1, -1), Vec3(-0.9, -0.9, -0.9));
  std::vector<DepthFrame> frames{{plane_depth(1.0), Pose::identity()}};
  const TsdfVolume vol = fuse_frames(frames, kCam, params);
  CHECK((vol.origin() - Vec3(-1, -1, -1)).norm() < 1e-12);
  const auto [lo, hi] = observed_bounds(frames, kCam, 0);
  CHECK(std::abs(lo.z() - 1.0) < 1e-12);
  CHECK(std::abs(hi.x() - 79.5 / 150.0) < 1e-12);
}
