#include <doctest.h>

#include <cmath>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/refine.hpp"
#include "posekit/shapes.hpp"
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

const CameraIntrinsics kVga(500, 500, 320, 240, 640, 480);
const CameraIntrinsics kSmall(200, 200, 79.5, 59.5, 160, 120);

Vec2 centroid(const Mask& m) {
  Vec2 c = Vec2::Zero();
  double w = 0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      c += m.at(x, y) * Vec2(x, y);
      w += m.at(x, y);
    }
  }
  return c / w;
}

Pose ahead(double z) { return {Mat3::Identity(), Vec3(0, 0, z)}; }

// Cameras on a ring around `target`, alternating above and below it.
std::vector<RefinementCamera> ring(const TriangleMesh& mesh, const Pose& truth, int n, double radius,
                                   const CameraIntrinsics& k, double ref_softness) {
  std::vector<RefinementCamera> cams;
  for (int i = 0; i < n; ++i) {
    const double az = 2 * kPi * i / n, el = i % 2 ? 0.5 : -0.2;
    const Vec3 eye = truth.translation +
                     radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const Pose cam = look_at(eye, truth.translation, Vec3::UnitZ());
    cams.push_back({cam, k, render_silhouette(mesh, camera_centric_pose(truth, cam), k, {ref_softness}), i});
  }
  return cams;
}

Pose perturb(const Pose& p, SplitMix64& rng, double angle, double shift) {
  return {axis_angle(random_unit(rng), angle) * p.rotation, p.translation + shift * random_unit(rng)};
}

}  // namespace

TEST_CASE("rough pose follows the principal axis") {
  PointCloud line;
  for (int i = 0; i <= 20; ++i) line.points.push_back(Vec3(0, 0, i / 20.0));
  const Pose p = init_rough_pose(line, Pose::identity(), 0.5);
  CHECK((p.translation - Vec3(0, 0, 0.5)).norm() < 1e-15);
  CHECK((p.z_axis() - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(p.orthonormality_error() < 1e-12);
  CHECK(p.rotation.determinant() > 0);

  // Symmetric cross with known spreads: covariance is exactly diagonal in (u, v, w).
  const Mat3 frame = euler_zyx(0.4, -0.7, 0.2);
  const Vec3 u = frame.col(0), v = frame.col(1), w = frame.col(2);
  PointCloud cross;
  for (double s : {-1.0, 1.0}) {
    cross.points.push_back(3.0 * s * u);
    cross.points.push_back(1.0 * s * v);
    cross.points.push_back(0.5 * s * w);
  }
  const Vec3 expected = u.z() >= 0 ? u : Vec3(-u);
  const Pose cam{rot_x(0.3), Vec3(1, 2, 3)};
  const Pose q = init_rough_pose(cross, cam, 0.8);
  CHECK((q.z_axis() - expected).norm() < 1e-9);
  CHECK((q.translation - (cam.translation + 0.8 * cam.z_axis())).norm() < 1e-15);
}

TEST_CASE("rough pose tie-breaking and errors") {
  PointCloud iso;
  for (int a = 0; a < 3; ++a) {
    iso.points.push_back(Vec3::Unit(a));
    iso.points.push_back(-Vec3::Unit(a));
  }
  CHECK((init_rough_pose(iso, Pose::identity(), 1).z_axis() - Vec3::UnitZ()).norm() < 1e-9);

  SplitMix64 rng(3);
  PointCloud blob;
  for (int i = 0; i < 500; ++i) blob.points.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()));
  const Pose b = init_rough_pose(blob, Pose::identity(), 1);
  CHECK(b.z_axis().z() >= 0);
  CHECK(b.orthonormality_error() < 1e-12);

  PointCloud two{{Vec3(0, 0, 0), Vec3(1, 0, 0)}, {}};
  require_code(ErrorCode::InvalidArgument, [&] { init_rough_pose(two, Pose::identity(), 1); });
  PointCloud same{{Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)}, {}};
  require_code(ErrorCode::Degenerate, [&] { init_rough_pose(same, Pose::identity(), 1); });
}

TEST_CASE("silhouette of a square and a cube") {
  // Unit square 2 m ahead: 500 * 1 / 2 = 250 px side.
  const Mask sq = render_silhouette(make_square(1.0), ahead(2), kVga, {});
  CHECK(std::abs(sq.foreground_area() - 250.0 * 250.0) < 0.01 * 250.0 * 250.0);
  const Vec2 c = centroid(sq);
  CHECK(std::abs(c.x() - 320) < 0.5);
  CHECK(std::abs(c.y() - 240) < 0.5);
  for (float v : sq.values) CHECK((v == 0.f || v == 1.f));

  // Unit cube centered 2 m ahead: the outline is its front face at 1.5 m.
  const double side = 500.0 / 1.5;
  const Mask cube = render_silhouette(make_unit_cube(), ahead(2), kVga, {});
  CHECK(std::abs(cube.foreground_area() - side * side) < 0.01 * side * side);
  CHECK(cube.at(320, 240) == 1.f);
  CHECK(cube.at(320 + 160, 240) == 1.f);
  CHECK(cube.at(320 + 172, 240) == 0.f);
}

TEST_CASE("silhouette moves with the object") {
  const Mask a = render_silhouette(make_square(0.5), ahead(2), kVga, {});
  const Mask b = render_silhouette(make_square(0.5), Pose{Mat3::Identity(), Vec3(0.05, 0, 2)}, kVga, {});
  CHECK(std::abs((centroid(b) - centroid(a)).x() - 500 * 0.05 / 2) < 0.5);
  CHECK(std::abs((centroid(b) - centroid(a)).y()) < 0.5);
}

TEST_CASE("silhouette area is invariant under camera roll") {
  const TriangleMesh mesh = make_box(Vec3(0.6, 0.3, 0.2));
  const Pose obj{euler_zyx(0.3, 0.5, 0.1), Vec3(0, 0, 2)};
  const double base = render_silhouette(mesh, obj, kVga, {}).foreground_area();
  for (double roll : {10.0, 33.0, 90.0, 150.0}) {
    // Rolling the camera about its optical axis rotates the object about it the other way.
    const Pose rolled = compose(Pose{rot_z(deg(-roll)), Vec3::Zero()}, obj);
    const double area = render_silhouette(mesh, rolled, kVga, {}).foreground_area();
    CHECK(std::abs(area - base) < 0.01 * base);
  }
}

TEST_CASE("soft silhouettes ramp across the outline") {
  const Mask hard = render_silhouette(make_square(1.0), ahead(2), kVga, {});
  const Mask soft = render_silhouette(make_square(1.0), ahead(2), kVga, {2.0});
  for (float v : soft.values) CHECK((v >= 0.f && v <= 1.f));
  CHECK(std::abs(soft.foreground_area() - hard.foreground_area()) < 0.01 * hard.foreground_area());
  // Edge at x = 320 + 125; the ramp is monotone across it and saturates 12 px away.
  CHECK(soft.at(320, 240) == 1.f);
  CHECK(soft.at(445 + 13, 240) == 0.f);
  CHECK(soft.at(445 - 13, 240) == 1.f);
  CHECK(std::abs(soft.at(445, 240) - 0.5f) < 1e-6);
  for (int x = 430; x < 460; ++x) CHECK(soft.at(x, 240) >= soft.at(x + 1, 240));
}

TEST_CASE("silhouette clipping and empty cases") {
  require_code(ErrorCode::EmptySilhouette, [] { render_silhouette(make_unit_cube(), ahead(-3), kVga, {}); });
  require_code(ErrorCode::InvalidArgument, [] { render_silhouette(TriangleMesh{}, ahead(2), kVga, {}); });
  // Off to the side but in front: renders nothing without error.
  CHECK(!render_silhouette(make_unit_cube(), Pose{Mat3::Identity(), Vec3(50, 0, 2)}, kVga, {}).any());

  // A floor plane 0.5 m below the camera reaching behind it: only the lower half is covered.
  const Pose floor{rot_x(deg(90)), Vec3(0, 0.5, 0)};
  for (double softness : {0.0, 2.0}) {
    const Mask m = render_silhouette(make_square(8.0), floor, kVga, {softness});
    for (float v : m.values) CHECK(std::isfinite(v));
    CHECK(m.at(320, 479) == 1.f);
    CHECK(m.at(320, 100) == 0.f);
  }
}

TEST_CASE("mask loss") {
  Mask ones(10, 10, 1.f), zeros(10, 10, 0.f);
  CHECK(mask_loss(ones, ones) == 0.0);
  CHECK(mask_loss(ones, zeros) == 1.0);
  Mask strip(10, 10, 0.f);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 5; ++x) strip.at(x, y) = 1.f;
  }
  CHECK(mask_loss(strip, ones) == 0.5);
  CHECK(mask_loss(ones, strip) == 0.5);
  Mask soft(10, 10, 0.25f);
  CHECK(std::abs(mask_loss(soft, zeros) - 0.0625) < 1e-12);
  require_code(ErrorCode::InvalidArgument, [&] { mask_loss(ones, Mask(10, 9)); });
}

TEST_CASE("objective matches the plain mask loss") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3(0.05, -0.02, 0.01)};
  const auto cams = ring(mesh, truth, 4, 1.0, kSmall, 0.0);
  const Pose off{axis_angle(Vec3::UnitX(), 0.05) * truth.rotation, truth.translation + Vec3(0.004, 0, 0)};
  double plain = 0;
  for (const auto& c : cams) {
    plain += mask_loss(render_silhouette(mesh, camera_centric_pose(off, c.cam_in_world), kSmall, {2.0}),
                       c.reference);
  }
  const SilhouetteRenderer renderer(mesh);
  CHECK(refinement_objective(renderer, off, cams, 2.0) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("finite-difference gradient is step consistent") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3::Zero()};
  const auto cams = ring(mesh, truth, 4, 1.0, kSmall, 0.0);
  SplitMix64 rng(9);
  const Pose off = perturb(truth, rng, deg(4), 0.006);
  const SilhouetteRenderer renderer(mesh);
  const auto g1 = refinement_gradient(renderer, off, cams, 2.0, 1e-3, 1e-3);
  const auto g2 = refinement_gradient(renderer, off, cams, 2.0, 5e-4, 5e-4);
  CHECK(g1.norm() > 0);
  CHECK((g1 - g2).norm() < 0.05 * g2.norm());
}

TEST_CASE("refinement is a no-op at the optimum") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3(0.05, -0.02, 0.01)};
  const auto cams = ring(mesh, truth, 4, 1.0, kSmall, 2.0);
  const RefinementResult r = refine_pose(mesh, truth, cams);
  CHECK(r.pose.approx(truth, 0));
  CHECK(r.trace.losses.size() == 1);
  CHECK(r.trace.losses[0] == 0.0);
  CHECK(r.trace.converged);
}

TEST_CASE("refinement recovers a perturbed icosphere") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3(0.05, -0.02, 0.01)};
  const auto cams = ring(mesh, truth, 8, 1.0, kSmall, 0.0);
  for (std::uint64_t seed : {1, 2}) {
    SplitMix64 rng(seed);
    const Pose start = perturb(truth, rng, deg(5), 0.005);
    const RefinementResult r = refine_pose(mesh, start, cams);
    CHECK(rotation_angle_between(r.pose.rotation, truth.rotation) < deg(1));
    CHECK((r.pose.translation - truth.translation).norm() < 0.002);
    for (std::size_t i = 1; i < r.trace.losses.size(); ++i) CHECK(r.trace.losses[i] <= r.trace.losses[i - 1]);
    CHECK(r.trace.final_loss() < r.trace.initial_loss());
  }
}

TEST_CASE("refinement shrinks the cube loss") {
  const TriangleMesh mesh = make_box(Vec3(0.2, 0.2, 0.2));
  const Pose truth{euler_zyx(0.5, 0.1, -0.2), Vec3(0, 0, 0)};
  const auto cams = ring(mesh, truth, 4, 1.2, kSmall, 0.0);
  SplitMix64 rng(17);
  const Pose start = perturb(truth, rng, deg(10), 0.01);
  const RefinementResult r = refine_pose(mesh, start, cams);
  CHECK(r.trace.final_loss() < 0.1 * r.trace.initial_loss());
}

TEST_CASE("refinement is gauge invariant") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3::Zero()};
  auto cams = ring(mesh, truth, 4, 1.0, kSmall, 0.0);
  SplitMix64 rng(23);
  const Pose start = perturb(truth, rng, deg(5), 0.005);
  RefinementConfig cfg;
  cfg.rounds = 3;
  const RefinementResult a = refine_pose(mesh, start, cams, cfg);

  const Pose g{euler_zyx(1.0, -0.4, 2.0), Vec3(3, -1, 0.5)};
  for (auto& c : cams) c.cam_in_world = compose(g, c.cam_in_world);
  const RefinementResult b = refine_pose(mesh, compose(g, start), cams, cfg);
  CHECK(b.pose.approx(compose(g, a.pose), 1e-6));
}

TEST_CASE("per-camera mode and frame subsets") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3::Zero()};
  const auto cams = ring(mesh, truth, 6, 1.0, kSmall, 0.0);
  SplitMix64 rng(5);
  const Pose start = perturb(truth, rng, deg(5), 0.005);

  RefinementConfig cfg;
  cfg.per_camera = true;
  cfg.rounds = 4;
  cfg.seed = 3;
  const RefinementResult r = refine_pose(mesh, start, cams, cfg);
  for (std::size_t i = 1; i < r.trace.losses.size(); ++i) CHECK(r.trace.losses[i] <= r.trace.losses[i - 1]);
  CHECK(r.trace.losses.back() < r.trace.losses.front());
  const RefinementResult again = refine_pose(mesh, start, cams, cfg);
  CHECK(again.pose.matrix() == r.pose.matrix());

  RefinementConfig subset;
  subset.rounds = 1;
  subset.frames = {4, 1};
  const RefinementResult s = refine_pose(mesh, start, cams, subset);
  CHECK(s.trace.frames == std::vector<int>{1, 4});
  CHECK(s.trace.frame_losses[0].size() == 2);
  subset.frames = {99};
  require_code(ErrorCode::InvalidArgument, [&] { refine_pose(mesh, start, cams, subset); });
}

TEST_CASE("refinement preconditions") {
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const auto cams = ring(mesh, Pose::identity(), 3, 1.0, kSmall, 0.0);
  // Far behind every camera of the ring.
  const Pose lost{Mat3::Identity(), Vec3(0, 0, 50)};
  require_code(ErrorCode::CannotStart, [&] { refine_pose(mesh, lost, cams); });

  auto blank = cams;
  for (auto& c : blank) c.reference = Mask(kSmall.width, kSmall.height);
  require_code(ErrorCode::InvalidArgument, [&] { refine_pose(mesh, Pose::identity(), blank); });

  RefinementConfig bad;
  bad.inner_iterations = 0;
  require_code(ErrorCode::InvalidArgument, [&] { refine_pose(mesh, Pose::identity(), cams, bad); });
  bad = {};
  bad.step = 0;
  require_code(ErrorCode::InvalidArgument, [&] { bad.validate(); });
}

TEST_CASE("refinement config and trace serialization") {
  RefinementConfig cfg;
  cfg.rounds = 4;
  cfg.per_camera = true;
  cfg.frames = {2, 3};
  cfg.seed = 12;
  const RefinementConfig back = refinement_config_from_json(refinement_config_to_json(cfg));
  CHECK(back.rounds == 4);
  CHECK(back.per_camera);
  CHECK(back.frames == cfg.frames);
  CHECK(back.seed == 12);
  CHECK(back.step == cfg.step);
  require_code(ErrorCode::InvalidArgument, [] { refinement_config_from_json(Json{{"step", -1.0}}); });

  const TriangleMesh mesh = make_icosphere(0.1, 0);
  const Pose truth = Pose::identity();
  const auto cams = ring(mesh, truth, 3, 1.0, kSmall, 0.0);
  RefinementConfig quick;
  quick.rounds = 2;
  quick.inner_iterations = 3;
  const RefinementResult r = refine_pose(mesh, Pose{rot_x(0.05), Vec3(0.003, 0, 0)}, cams, quick);
  const Json j = r.trace.to_json();
  CHECK(j.at("losses").size() == r.trace.losses.size());
  CHECK(j.at("poses").size() == r.trace.poses.size());
  const std::string csv = r.trace.to_csv();
  CHECK(csv.rfind("round,loss,hard_loss,qw,qx,qy,qz,tx,ty,tz\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.trace.losses.size() + 1);
}
