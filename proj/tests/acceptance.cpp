// One line per acceptance criterion: PASS/FAIL, measured values, runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "posekit/align.hpp"
#include "posekit/fuse.hpp"
#include "posekit/ingest.hpp"
#include "posekit/manifest.hpp"
#include "posekit/metrics.hpp"
#include "posekit/refine.hpp"
#include "posekit/shapes.hpp"
#include "support.hpp"
#include "textured_fixture.hpp"

using namespace posekit;
using namespace posekit::test;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict sim3_construct_and_recover() {
  Verdict v;
  const VirtualViewSet views = sample_virtual_views(make_icosphere(0.1, 1), {});
  double worst_s = 0, worst_r = 0, worst_t = 0, worst_rms = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng = SplitMix64::keyed(1000, seed);
    const Similarity planted = random_similarity(rng);  // SfM frame -> object frame
    const Similarity to_sfm = planted.inverse();

    // Zero noise.
    std::vector<Vec3> src, dst;
    std::vector<PoseCorrespondence> pairs;
    for (std::size_t i = 0; i < views.poses.size(); ++i) {
      const Pose est = apply_similarity(views.poses[i], to_sfm);
      src.push_back(est.translation);
      dst.push_back(views.poses[i].translation);
      pairs.push_back({VirtualViewSet::image_name(i), est, views.poses[i]});
    }
    RansacParams rp;
    rp.seed = seed;
    for (const Similarity& got : {umeyama_align(src, dst), ransac_sim3(pairs, rp).similarity}) {
      worst_s = std::max(worst_s, std::abs(got.scale - planted.scale) / planted.scale);
      const Eigen::AngleAxisd aa(Mat3(got.rotation.transpose() * planted.rotation));
      worst_r = std::max(worst_r, std::abs(aa.angle()));
      worst_t = std::max(worst_t, (got.translation - planted.translation).norm());
    }

    // 30% outliers and 2 mm noise (per axis, object frame).
    std::vector<std::size_t> order(views.poses.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::set<std::size_t> outliers(order.begin(), order.begin() + order.size() * 3 / 10);
    std::vector<PoseCorrespondence> noisy;
    for (std::size_t i = 0; i < views.poses.size(); ++i) {
      Pose est;
      if (outliers.count(i)) {
        est = random_pose(rng, 5.0);
      } else {
        Pose p = views.poses[i];
        p.translation += 0.002 * Vec3(rng.normal(), rng.normal(), rng.normal());
        est = apply_similarity(p, to_sfm);
      }
      noisy.push_back({VirtualViewSet::image_name(i), est, views.poses[i]});
    }
    const AlignmentReport rep = ransac_sim3(noisy, rp);
    double sq = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      if (outliers.count(i)) continue;
      sq += (apply_similarity(noisy[i].estimated, rep.similarity).translation - views.poses[i].translation).squaredNorm();
      ++n;
    }
    worst_rms = std::max(worst_rms, std::sqrt(sq / static_cast<double>(n)));
  }
  v.require(worst_s < 1e-6, "relative scale error");
  v.require(worst_r < 1e-6, "rotation error");
  v.require(worst_t < 1e-6, "translation error");
  v.require(worst_rms < 0.005, "center RMS with outliers and noise");
  v.note("noise-free max |ds|/s " + fmt("%.2e", worst_s) + ", rot " + fmt("%.2e", worst_r) + " rad, t " +
         fmt("%.2e", worst_t) + " m; worst RMS over 20 seeds " + fmt("%.2f", worst_rms * 1000) + " mm");
  return v;
}

Verdict texture_rich_end_to_end() {
  Verdict v;
  const TexturedFixture f = make_fixture(31, 0.0);
  const TextureRichResult r = annotate_texture_rich(f.model, f.views, f.real_names, {});
  double worst_r = 0, worst_c = 0;
  for (std::size_t i = 0; i < f.real_names.size(); ++i) {
    const auto it = r.cameras.find(f.real_names[i]);
    if (it == r.cameras.end()) {
      v.require(false, "camera " + f.real_names[i] + " missing");
      continue;
    }
    const Eigen::AngleAxisd aa(Mat3(it->second.rotation.transpose() * f.real_truth[i].rotation));
    worst_r = std::max(worst_r, std::abs(aa.angle()) * 180 / kPi);
    worst_c = std::max(worst_c, (it->second.translation - f.real_truth[i].translation).norm());
  }
  v.require(worst_r < 0.01, "rotation error");
  v.require(worst_c < 1e-5, "center error");
  v.note(std::to_string(f.real_names.size()) + " cameras, max rotation " + fmt("%.2e", worst_r) + " deg, max center " +
         fmt("%.2e", worst_c) + " m");
  return v;
}

Verdict silhouette_refinement() {
  Verdict v;
  const TriangleMesh mesh = make_icosphere(0.1, 1);
  const CameraIntrinsics k(200, 200, 79.5, 59.5, 160, 120);
  const Pose truth{euler_zyx(0.3, 0.2, 0.1), Vec3(0.05, -0.02, 0.01)};
  std::vector<RefinementCamera> cams;
  for (int i = 0; i < 8; ++i) {
    const double az = 2 * kPi * i / 8, el = i % 2 ? -0.2 : 0.5;
    const Vec3 eye = truth.translation + Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const Pose cam = look_at(eye, truth.translation, Vec3::UnitZ());
    cams.push_back({cam, k, render_silhouette(mesh, camera_centric_pose(truth, cam), k, {}), i});
  }
  int good = 0;
  bool monotone = true;
  std::ostringstream errs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitMix64 rng = SplitMix64::keyed(2000, seed);
    const Pose start{truth.rotation * axis_angle(random_unit(rng), deg(5)),
                     truth.translation + 0.005 * random_unit(rng)};
    const RefinementResult r = refine_pose(mesh, start, cams);
    const Eigen::AngleAxisd aa(Mat3(r.pose.rotation.transpose() * truth.rotation));
    const double rot = std::abs(aa.angle()) * 180 / kPi;
    const double tr = (r.pose.translation - truth.translation).norm();
    good += rot < 1.0 && tr < 0.002;
    for (std::size_t i = 1; i < r.trace.losses.size(); ++i) monotone &= r.trace.losses[i] <= r.trace.losses[i - 1];
    errs << (seed ? " " : "") << fmt("%.2f", rot) << "/" << fmt("%.1f", tr * 1000);
  }
  v.require(good >= 9, "fewer than 9 of 10 seeds within 1 deg / 2 mm");
  v.require(monotone, "accepted-round loss increased");
  v.note(std::to_string(good) + "/10 recovered; deg/mm per seed: " + errs.str());
  return v;
}

// Brute-force oracles.
double brute_chamfer(const PointCloud& p, const PointCloud& q) {
  auto dir = [](const PointCloud& a, const PointCloud& b) {
    double acc = 0;
    for (const auto& x : a.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : b.points) {
        const double dx = x.x() - y.x(), dy = x.y() - y.y(), dz = x.z() - y.z();
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      acc += best;
    }
    return acc / static_cast<double>(a.size());
  };
  return dir(p, q) + dir(q, p);
}

F1Score brute_f1(const PointCloud& p, const PointCloud& q, double tau) {
  auto share = [tau](const PointCloud& a, const PointCloud& b) {
    std::size_t hits = 0;
    for (const auto& x : a.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : b.points) {
        const double dx = x.x() - y.x(), dy = x.y() - y.y(), dz = x.z() - y.z();
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      hits += std::sqrt(best) <= tau;
    }
    return static_cast<double>(hits) / static_cast<double>(a.size());
  };
  F1Score s;
  s.tau = tau;
  s.precision = share(p, q);
  s.recall = share(q, p);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

Verdict metrics_oracle() {
  Verdict v;
  int exact = 0;
  bool monotone = true;
  for (std::uint64_t pair = 0; pair < 100; ++pair) {
    SplitMix64 rng = SplitMix64::keyed(3000, pair);
    PointCloud p, q;
    const int np = 1 + static_cast<int>(rng.below(500)), nq = 1 + static_cast<int>(rng.below(500));
    for (int i = 0; i < np; ++i) p.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (int i = 0; i < nq; ++i) q.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1) + 0.2);
    const double tau = rng.uniform(0.02, 0.3);
    const F1Score got = f1_at(p, q, tau), want = brute_f1(p, q, tau);
    exact += chamfer(p, q) == brute_chamfer(p, q) && got.precision == want.precision && got.recall == want.recall &&
             got.f1 == want.f1;
    double last = -1;
    for (double t : {0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      const double f = f1_at(p, q, t).f1;
      monotone &= f >= last;
      last = f;
    }
  }
  v.require(exact == 100, "brute-force mismatch");
  v.require(monotone, "f1 not monotone in tau");

  double worst = 1;
  for (const TriangleMesh& m : {make_icosphere(0.3, 2), make_subdivided_box(Vec3(0.4, 0.25, 0.1), 4)}) {
    const RescaleResult r = rescale_longest_edge(m, {m});
    const double f = f1_at(sample_surface(r.others[0], 10000, 1), sample_surface(r.gt, 10000, 2), 0.3).f1;
    worst = std::min(worst, f);
  }
  v.require(worst > 0.99, "identical-mesh f1@0.3");
  v.note(std::to_string(exact) + "/100 exact; identical-mesh f1@0.3 min " + fmt("%.4f", worst));
  return v;
}

Verdict lie_algebra() {
  Verdict v;
  SplitMix64 rng(4000);
  double worst = 0, worst_rot = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 axis = random_unit(rng);
    const double angle = rng.uniform(0, 3.0);
    const Twist d(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)), angle * axis);
    const Pose p = se3_exp(d);
    worst = std::max(worst, (se3_log(p).vector() - d.vector()).norm());
    worst_rot = std::max(worst_rot, (p.rotation - Eigen::AngleAxisd(angle, axis).toRotationMatrix()).norm());
  }
  // One-step exact correction: the increment that maps xi onto a target
  // under right multiplication lands on it in one update; left
  // multiplication does not.
  double worst_fix = 0, best_left = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const Pose xi = random_pose(rng), target = compose(xi, se3_exp(Twist(
                                                               Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)),
                                                               rng.uniform(0.05, 0.5) * random_unit(rng))));
    const Twist delta = se3_log(compose(inverse(xi), target));
    const Mat4 diff = pose_update(xi, delta).matrix() - target.matrix();
    worst_fix = std::max(worst_fix, diff.cwiseAbs().maxCoeff());
    best_left = std::min(best_left, (compose(se3_exp(delta), xi).matrix() - target.matrix()).cwiseAbs().maxCoeff());
  }
  v.require(worst < 1e-9, "exp/log round trip");
  v.require(worst_rot < 1e-12, "rotation differs from angle-axis");
  v.require(worst_fix < 1e-9, "right-multiplied correction");
  v.require(best_left > 1e-6, "left multiplication also corrects");
  v.note("round trip max " + fmt("%.1e", worst) + " over 10k twists; correction residual " + fmt("%.1e", worst_fix));
  return v;
}

Verdict tsdf_plane() {
  Verdict v;
  const CameraIntrinsics k(150, 150, 79.5, 59.5, 160, 120);
  const double planted = 0.937, voxel = 0.005;
  TsdfVolume vol = TsdfVolume::covering(Vec3(-0.1, -0.08, 0.85), Vec3(0.1, 0.08, 1.05), voxel, 4 * voxel);
  vol.integrate(DepthMap(k.width, k.height, planted), Pose::identity(), k);
  const auto& d = vol.dims();
  double worst = 0;
  int columns = 0;
  for (int y = 0; y < d[1]; ++y) {
    for (int x = 0; x < d[0]; ++x) {
      for (int z = 0; z + 1 < d[2]; ++z) {
        if (!(vol.weight(x, y, z) > 0 && vol.weight(x, y, z + 1) > 0)) continue;
        const double a = vol.tsdf(x, y, z), b = vol.tsdf(x, y, z + 1);
        if ((a < 0) == (b < 0)) continue;
        worst = std::max(worst, std::abs(vol.center(x, y, z).z() + voxel * a / (a - b) - planted));
        ++columns;
      }
    }
  }
  v.require(columns == d[0] * d[1], "zero crossing missing in some columns");
  v.require(worst <= voxel / 2, "zero crossing off the planted depth");

  // Order independence over three overlapping views of a sphere.
  std::vector<Pose> cams;
  std::vector<DepthMap> depths;
  const double radius = 0.1;
  for (int i = 0; i < 3; ++i) {
    const double az = 2 * kPi * i / 3;
    cams.push_back(look_at(0.6 * Vec3(std::cos(az), std::sin(az), 0.3), Vec3::Zero(), Vec3::UnitZ()));
    DepthMap dm(k.width, k.height);
    const Vec3 c = inverse(cams.back()) * Vec3::Zero();
    for (int yy = 0; yy < k.height; ++yy) {
      for (int xx = 0; xx < k.width; ++xx) {
        const Vec3 ray((xx - k.cx) / k.fx, (yy - k.cy) / k.fy, 1.0);
        const double qa = ray.squaredNorm(), qb = -2 * ray.dot(c), qc = c.squaredNorm() - radius * radius;
        const double disc = qb * qb - 4 * qa * qc;
        if (disc >= 0) dm.at(xx, yy) = (-qb - std::sqrt(disc)) / (2 * qa);
      }
    }
    depths.push_back(dm);
  }
  const TsdfVolume empty = TsdfVolume::covering(Vec3::Constant(-0.15), Vec3::Constant(0.15), 0.006, 0.024);
  TsdfVolume fwd = empty, rev = empty;
  for (int i = 0; i < 3; ++i) fwd.integrate(depths[i], cams[i], k);
  for (int i = 2; i >= 0; --i) rev.integrate(depths[i], cams[i], k);
  double diff = 0;
  for (std::size_t i = 0; i < fwd.size(); ++i) diff = std::max(diff, std::abs(fwd.tsdf_values()[i] - rev.tsdf_values()[i]));
  v.require(diff < 1e-6, "integration order changes the volume");
  v.note("max crossing error " + fmt("%.2e", worst) + " m (half voxel " + fmt("%.4f", voxel / 2) +
         "); order difference " + fmt("%.1e", diff));
  return v;
}

Verdict parser_round_trips() {
  Verdict v;
  TempDir tmp("posekit_acceptance");
  SplitMix64 rng(5000);

  SfmModel m;
  m.cameras[1] = {1, "OPENCV", 640, 480, {512.25, 511.75, 319.5, 239.5, 0.01, -0.002, 0.0003, 0.0004}};
  for (int i = 0; i < 40; ++i) {
    SfmImage img;
    img.id = i + 1;
    img.camera_id = 1;
    img.name = "img_" + std::to_string(i) + ".jpg";
    img.set_cam_in_world(random_pose(rng));
    for (int o = 0; o < 4; ++o) img.observations.push_back({rng.uniform(0, 640), rng.uniform(0, 480), o - 1});
    m.images.push_back(img);
  }
  m.points.push_back({3, {rng.normal(), rng.normal(), rng.normal()}, {10, 20, 30}, 0.5, {{1, 0}, {2, 1}}});
  write_sfm_text(m, tmp / "sfm");
  const SfmModel m2 = parse_sfm_text(tmp / "sfm");
  write_sfm_text(m2, tmp / "sfm2");
  v.require(m2 == m, "SfM parse(write) differs");
  v.require(read_file(tmp / "sfm" / "images.txt") == read_file(tmp / "sfm2" / "images.txt"), "SfM rewrite differs");

  Trajectory traj;
  for (int i = 0; i < 50; ++i) traj.push_back({0.1 * i + 0.05, random_pose(rng, 3.0)});
  write_trajectory(traj, tmp / "t.txt");
  const Trajectory t2 = parse_trajectory(tmp / "t.txt");
  bool same = t2.size() == traj.size();
  for (std::size_t i = 0; same && i < traj.size(); ++i) {
    same = t2[i].timestamp == traj[i].timestamp && t2[i].cam_in_world.approx(traj[i].cam_in_world, 1e-12);
  }
  v.require(same, "trajectory parse(write) differs");

  write_obj(make_unit_cube(), tmp / "mesh.obj");
  SceneManifest sm;
  sm.scene_id = "acceptance";
  sm.intrinsics = CameraIntrinsics(500, 500, 319.5, 239.5, 640, 480);
  sm.mesh = "mesh.obj";
  sm.trajectory = "t.txt";
  sm.frames = {{0, "", "", "", 0.05}, {1, "", "", "", std::nullopt}};
  Annotation a;
  a.object_pose = random_pose(rng);
  a.refinement_history.push_back({4, 0.2, 0.01, {0, 1}});
  a.updated_at = "2026-01-01T00:00:00Z";
  sm.annotation = a;
  save_manifest(sm, tmp / "manifest.json");
  const SceneManifest sm2 = load_manifest(tmp / "manifest.json");
  v.require(manifest_to_json(sm2) == manifest_to_json(sm), "manifest parse(write) differs");
  v.require(read_file(tmp / "manifest.json") == dump_canonical(manifest_to_json(sm2)), "manifest rewrite differs");

  // World-to-camera record: rotation 90 deg about z, t = (1, 0, 0). By hand
  // the camera-to-world rotation is R^T with rows (0 1 0), (-1 0 0), (0 0 1)
  // and the center -R^T t = (0, 1, 0).
  fs::create_directories(tmp / "hand");
  write_file_atomic(tmp / "hand" / "cameras.txt", "1 PINHOLE 640 480 500 500 320 240\n");
  write_file_atomic(tmp / "hand" / "images.txt",
                    "1 0.70710678118654757 0 0 0.70710678118654746 1 0 0 1 a.png\n\n");
  write_file_atomic(tmp / "hand" / "points3D.txt", "");
  const Pose c = parse_sfm_text(tmp / "hand").images.at(0).cam_in_world();
  Mat3 rt;
  rt << 0, 1, 0, -1, 0, 0, 0, 0, 1;
  v.require((c.rotation - rt).cwiseAbs().maxCoeff() < 1e-15, "90 deg rotation");
  v.require((c.translation - Vec3(0, 1, 0)).norm() < 1e-15, "90 deg center");
  v.note("SfM (40 images), trajectory (50 poses), manifest; 90 deg case exact");
  return v;
}

Verdict split_stratification() {
  Verdict v;
  std::vector<DatasetEntry> entries;
  for (int c = 0; c < 10; ++c) {
    for (int o = 0; o < 10; ++o) entries.push_back({"c" + std::to_string(c) + "_o" + std::to_string(o), "cat" + std::to_string(c)});
  }
  std::map<std::string, std::string> category;
  for (const auto& e : entries) category[e.id] = e.category;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DatasetSplit a = split_dataset(entries, {0.7, 0.2, 0.1}, seed);
    const DatasetSplit b = split_dataset(entries, {0.7, 0.2, 0.1}, seed);
    v.require(a.train == b.train && a.test == b.test && a.val == b.val, "not deterministic");
    std::map<std::string, std::array<int, 3>> counts;
    std::set<std::string> seen;
    const std::vector<std::string>* parts[3] = {&a.train, &a.test, &a.val};
    for (int k = 0; k < 3; ++k) {
      for (const auto& id : *parts[k]) {
        ++counts[category.at(id)][k];
        seen.insert(id);
      }
    }
    v.require(seen.size() == entries.size(), "objects lost or duplicated");
    for (const auto& [cat, n] : counts) v.require(n == std::array<int, 3>{7, 2, 1}, cat + " is not 7/2/1");
  }
  v.note("10 categories x 10 objects, seeds 0-4: 7/2/1 each, repeatable");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Verdict()> fn;
  };
  const std::vector<Criterion> criteria{
      {"sim3-construct-and-recover", 5, sim3_construct_and_recover},
      {"texture-rich-end-to-end", 10, texture_rich_end_to_end},
      {"silhouette-refinement-perturb-and-recover", 180, silhouette_refinement},
      {"metrics-oracle-equivalence", 60, metrics_oracle},
      {"lie-algebra-suite", 5, lie_algebra},
      {"tsdf-plane-and-order", 30, tsdf_plane},
      {"parser-round-trips", 5, parser_round_trips},
      {"split-stratification", 5, split_stratification},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < c.limit_s, "runtime over " + fmt("%.0f", c.limit_s) + " s");
    failed += !v.pass;
    std::printf("%s %s (%.2f s / %.0f s) %s\n", v.pass ? "PASS" : "FAIL", c.name, secs, c.limit_s, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
