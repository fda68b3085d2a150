#include "posekit/cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "posekit/align.hpp"
#include "posekit/error.hpp"
#include "posekit/fuse.hpp"
#include "posekit/ingest.hpp"
#include "posekit/manifest.hpp"
#include "posekit/metrics.hpp"
#include "posekit/refine.hpp"
#include "posekit/service.hpp"
#include "text.hpp"

namespace posekit {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

Json read_json(const fs::path& file) {
  const std::string content = read_file(file);
  try {
    return Json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ErrorCode::MalformedLine, file.string(), 0, e.what());
  }
}

void log_seed(std::ostream& err, const CLI::Option* opt, std::uint64_t seed) {
  err << "seed: " << seed << (opt->count() ? "" : " (default)") << "\n";
}

// Writes `bytes` to `file`, or to `out` when the path is "-" or empty.
void emit(const std::string& file, const std::string& bytes, std::ostream& out) {
  if (file.empty() || file == "-") {
    out << bytes;
  } else {
    write_file_atomic(file, bytes);
  }
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::istringstream in(read_file(file));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    const std::string t = trim(line);
    if (!t.empty() && t[0] != '#') lines.push_back(t);
  }
  return lines;
}

struct SceneInputs {
  fs::path file;
  SceneManifest manifest;
  std::vector<std::optional<Pose>> cameras;
};

SceneInputs load_scene(const fs::path& file) {
  SceneInputs s{file, load_manifest(file, true), {}};
  s.cameras = frame_camera_poses(s.manifest);
  return s;
}

FusionParams fusion_params(double voxel, double trunc, double max_depth) {
  FusionParams p;
  p.voxel_size = voxel;
  p.truncation_voxels = trunc;
  p.max_depth = max_depth;
  return p;
}

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

// ---------------------------------------------------------------------------
// Validation of arbitrary inputs

std::string detect_kind(const fs::path& p) {
  if (fs::is_directory(p)) return fs::exists(p / "manifest.json") ? "manifest" : "sfm";
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return "mesh";
  if (ext == ".ply") return "ply";
  if (ext == ".txt") return "trajectory";
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    const std::string head = read_file(p).substr(0, 64);
    std::istringstream in(head);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    return magic == "P5" && maxval > 255 ? "depth" : "mask";
  }
  if (ext == ".json") {
    const Json j = read_json(p);
    if (j.contains("images") && j.contains("trajectory") && j.contains("params")) return "views";
    if (j.contains("config") || j.contains("rounds")) return "config";
    return "manifest";
  }
  const std::string head = read_file(p).substr(0, 256);
  if (head.find("posekit-tsdf") != std::string::npos) return "volume";
  throw Error(ErrorCode::UnsupportedFormat, "cannot tell what kind of file " + p.string() + " is; pass --kind");
}

Json validate_file(const fs::path& p, std::string kind) {
  if (kind == "auto") kind = detect_kind(p);
  Json out{{"file", p.string()}, {"kind", kind}};
  if (kind == "manifest") {
    const fs::path file = fs::is_directory(p) ? p / "manifest.json" : p;
    const SceneManifest m = load_manifest(file, true);
    const auto cams = frame_camera_poses(m);
    std::size_t posed = 0;
    for (const auto& c : cams) posed += c.has_value();
    const TriangleMesh mesh = parse_mesh(m.resolve(m.mesh));
    for (const auto& f : m.frames) {
      if (!f.mask.empty()) {
        const Mask mk = parse_mask(m.resolve(f.mask), m.mask_threshold);
        check_dimensions(mk.width, mk.height, m.intrinsics, f.mask);
      }
      if (!f.depth.empty()) {
        const DepthMap d = parse_depth(m.resolve(f.depth), m.depth_scale);
        check_dimensions(d.width, d.height, m.intrinsics, f.depth);
      }
    }
    out["scene_id"] = m.scene_id;
    out["frames"] = m.frames.size();
    out["posed_frames"] = posed;
    out["mesh_triangles"] = mesh.triangles.size();
    out["annotated"] = m.annotation.has_value();
  } else if (kind == "sfm") {
    const SfmModel model = parse_sfm_text(p);
    for (const auto& [id, cam] : model.cameras) cam.intrinsics();
    out["cameras"] = model.cameras.size();
    out["images"] = model.images.size();
    out["points"] = model.points.size();
  } else if (kind == "trajectory") {
    out["poses"] = parse_trajectory(p).size();
  } else if (kind == "mesh") {
    const TriangleMesh m = parse_mesh(p);
    out["vertices"] = m.vertices.size();
    out["triangles"] = m.triangles.size();
  } else if (kind == "ply") {
    const TriangleMesh m = parse_mesh(p);
    out["vertices"] = m.vertices.size();
    out["triangles"] = m.triangles.size();
  } else if (kind == "cloud") {
    out["points"] = parse_point_cloud(p).size();
  } else if (kind == "mask") {
    const Mask m = parse_mask(p);
    out["width"] = m.width;
    out["height"] = m.height;
    out["foreground"] = m.foreground_area();
  } else if (kind == "depth") {
    const DepthMap d = parse_depth(p);
    std::size_t valid = 0;
    for (double v : d.values) valid += v > 0;
    out["width"] = d.width;
    out["height"] = d.height;
    out["valid"] = valid;
  } else if (kind == "volume") {
    const TsdfVolume v = load_volume(p);
    out["dims"] = v.dims();
    out["voxel_size"] = v.voxel_size();
  } else if (kind == "views") {
    out["views"] = read_virtual_views(p).poses.size();
  } else if (kind == "config") {
    const Json j = read_json(p);
    refinement_config_from_json(j.contains("config") ? j.at("config") : j).validate();
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown kind '" + kind + "'");
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object pose annotation and reconstruction evaluation tools", "posekit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // sample-views
  auto* sv = app.add_subcommand("sample-views", "Sample virtual camera poses around a mesh");
  std::string sv_mesh, sv_out;
  ViewSamplingParams vp;
  sv->add_option("--mesh", sv_mesh, "Object mesh (OBJ or PLY)")->required()->check(CLI::ExistingFile);
  sv->add_option("--out", sv_out, "Output stem: writes <stem>.txt and <stem>.json")->required();
  sv->add_option("--count", vp.count, "Number of views")->capture_default_str();
  sv->add_option("--distance-min", vp.distance_min, "Minimum distance, in bounding-sphere radii")->capture_default_str();
  sv->add_option("--distance-max", vp.distance_max, "Maximum distance, in bounding-sphere radii")->capture_default_str();
  sv->add_option("--azimuth-min", vp.azimuth_min_deg, "Minimum azimuth (degrees)")->capture_default_str();
  sv->add_option("--azimuth-max", vp.azimuth_max_deg, "Maximum azimuth (degrees)")->capture_default_str();
  sv->add_option("--elevation-min", vp.elevation_min_deg, "Minimum elevation (degrees)")->capture_default_str();
  sv->add_option("--elevation-max", vp.elevation_max_deg, "Maximum elevation (degrees)")->capture_default_str();
  auto* sv_seed = sv->add_option("--seed", vp.seed, "Random seed")->capture_default_str();

  // annotate-textured
  auto* at = app.add_subcommand("annotate-textured", "Object-frame camera poses from an SfM model with rendered views");
  std::string at_sfm, at_views, at_out, at_real_list, at_matches;
  std::vector<std::string> at_real;
  TextureRichParams tp;
  int at_min_matches = 0;
  at->add_option("--sfm", at_sfm, "SfM text model directory (cameras.txt, images.txt, points3D.txt)")
      ->required()
      ->check(CLI::ExistingDirectory);
  at->add_option("--views", at_views, "Virtual view sidecar JSON from sample-views")->required()->check(CLI::ExistingFile);
  auto* at_real_opt = at->add_option("--real", at_real, "Real image names (comma separated)")->delimiter(',');
  auto* at_list_opt =
      at->add_option("--real-list", at_real_list, "File with one real image name per line")->check(CLI::ExistingFile);
  at_real_opt->excludes(at_list_opt);
  at->add_option("--threshold", tp.ransac.threshold, "RANSAC inlier threshold (meters)")->capture_default_str();
  at->add_option("--max-iters", tp.ransac.max_iters, "RANSAC iterations")->capture_default_str();
  auto* at_seed = at->add_option("--seed", tp.ransac.seed, "Random seed")->capture_default_str();
  auto* at_min_opt = at->add_option("--min-matches", at_min_matches, "Drop rendered views with fewer matches");
  auto* at_matches_opt = at->add_option("--matches", at_matches, "JSON object: rendered view name -> match count")
                             ->check(CLI::ExistingFile);
  at_min_opt->needs(at_matches_opt);
  at->add_option("--out", at_out, "Output JSON (default: stdout)");

  // init-pose
  auto* ip = app.add_subcommand("init-pose", "Rough object pose from the fused scene cloud");
  std::string ip_manifest, ip_out;
  double ip_distance = 0, ip_voxel = 0.008, ip_trunc = 4, ip_max_depth = 0;
  ip->add_option("--manifest", ip_manifest, "Scene manifest")->required()->check(CLI::ExistingFile);
  auto* ip_dist_opt = ip->add_option("--distance", ip_distance, "Distance ahead of the first camera (default: manifest)");
  ip->add_option("--voxel", ip_voxel, "TSDF voxel size (meters)")->capture_default_str();
  ip->add_option("--trunc-voxels", ip_trunc, "Truncation in voxels")->capture_default_str();
  ip->add_option("--max-depth", ip_max_depth, "Ignore depth beyond this (0 = no limit)")->capture_default_str();
  ip->add_option("--out", ip_out, "Output pose JSON (default: stdout)");

  // refine
  auto* rf = app.add_subcommand("refine", "Silhouette refinement of the object pose");
  std::string rf_manifest, rf_pose, rf_config, rf_out, rf_trace;
  bool rf_init = false, rf_save = false, rf_per_camera = false;
  RefinementConfig rc;
  std::vector<int> rf_frames;
  double rf_voxel = 0.008;
  rf->add_option("--manifest", rf_manifest, "Scene manifest")->required()->check(CLI::ExistingFile);
  auto* rf_pose_opt = rf->add_option("--pose", rf_pose, "Start pose JSON (default: saved annotation, else rough pose)")
                          ->check(CLI::ExistingFile);
  auto* rf_init_opt = rf->add_flag("--init", rf_init, "Start from the rough pose even if an annotation exists");
  rf_pose_opt->excludes(rf_init_opt);
  rf->add_option("--config", rf_config, "RefinementConfig JSON; flags below override it")->check(CLI::ExistingFile);
  auto* rf_rounds = rf->add_option("--rounds", rc.rounds, "Relinearization rounds");
  auto* rf_inner = rf->add_option("--inner", rc.inner_iterations, "Steps per round");
  auto* rf_step = rf->add_option("--step", rc.step, "Initial step size");
  auto* rf_soft = rf->add_option("--softness", rc.softness, "Soft silhouette band (pixels)");
  auto* rf_pc = rf->add_flag("--per-camera", rf_per_camera, "Stochastic single-camera steps");
  auto* rf_frames_opt = rf->add_option("--frames", rf_frames, "Frame indices (comma separated)")->delimiter(',');
  auto* rf_seed = rf->add_option("--seed", rc.seed, "Random seed (per-camera mode)");
  rf->add_option("--voxel", rf_voxel, "TSDF voxel size for the rough pose")->capture_default_str();
  rf->add_option("--out", rf_out, "Output pose JSON (default: stdout)");
  rf->add_option("--trace", rf_trace, "Trace output (.csv for CSV, JSON otherwise)");
  rf->add_flag("--save", rf_save, "Store the refined pose as the manifest annotation");

  // fuse
  auto* fu = app.add_subcommand("fuse", "TSDF fusion of the scene depth frames");
  std::string fu_manifest, fu_out, fu_points;
  double fu_voxel = 0.008, fu_trunc = 4, fu_max_depth = 0;
  fu->add_option("--manifest", fu_manifest, "Scene manifest")->required()->check(CLI::ExistingFile);
  fu->add_option("--out", fu_out, "Volume file");
  fu->add_option("--points", fu_points, "Surface points as PLY");
  fu->add_option("--voxel", fu_voxel, "Voxel size (meters)")->capture_default_str();
  fu->add_option("--trunc-voxels", fu_trunc, "Truncation in voxels")->capture_default_str();
  fu->add_option("--max-depth", fu_max_depth, "Ignore depth beyond this (0 = no limit)")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Chamfer distance and F1 between two meshes");
  std::string ev_pred, ev_gt, ev_out, ev_csv, ev_scene, ev_method;
  MetricParams mp;
  bool ev_no_rescale = false;
  ev->add_option("--pred", ev_pred, "Predicted mesh")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", ev_gt, "Ground-truth mesh")->required()->check(CLI::ExistingFile);
  ev->add_option("--tau", mp.taus, "F1 thresholds (comma separated)")->delimiter(',')->capture_default_str();
  ev->add_option("--samples", mp.samples, "Surface samples per mesh")->capture_default_str();
  auto* ev_seed = ev->add_option("--seed", mp.seed, "Random seed")->capture_default_str();
  ev->add_flag("--no-rescale", ev_no_rescale, "Skip the longest-edge-10 rescale");
  ev->add_option("--out", ev_out, "Report JSON (default: stdout)");
  ev->add_option("--csv", ev_csv, "CSV with one row per threshold");
  ev->add_option("--scene", ev_scene, "Scene label for the CSV");
  ev->add_option("--method", ev_method, "Method label for the CSV");

  // split
  auto* sp = app.add_subcommand("split", "Category-stratified train/test/val split");
  std::string sp_input, sp_out;
  std::vector<double> sp_ratio{0.7, 0.2, 0.1};
  std::uint64_t sp_seed_value = 0;
  sp->add_option("--input", sp_input, "CSV lines 'object_id,category'")->required()->check(CLI::ExistingFile);
  sp->add_option("--ratio", sp_ratio, "train,test,val ratios")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  auto* sp_seed = sp->add_option("--seed", sp_seed_value, "Random seed")->capture_default_str();
  sp->add_option("--out", sp_out, "Split JSON (default: stdout)");

  // validate
  auto* va = app.add_subcommand("validate", "Parse and check an input file");
  std::string va_path, va_kind = "auto";
  va->add_option("path", va_path, "File or directory")->required();
  va->add_option("--kind", va_kind, "auto, manifest, sfm, trajectory, mesh, ply, cloud, mask, depth, volume, views, config")
      ->capture_default_str();

  // serve
  auto* se = app.add_subcommand("serve", "HTTP annotation service");
  ServiceOptions so;
  std::string se_root, se_static, se_host = "127.0.0.1";
  int se_port = 8080;
  se->add_option("--data-root", se_root, "Directory of scene folders")->required()->envname("POSEKIT_DATA_ROOT");
  se->add_option("--port", se_port, "TCP port (0 = any)")->envname("POSEKIT_PORT")->capture_default_str();
  se->add_option("--host", se_host, "Bind address")->envname("POSEKIT_HOST")->capture_default_str();
  se->add_option("--static-dir", se_static, "Built UI to serve at /")->envname("POSEKIT_STATIC_DIR");
  se->add_option("--max-undo", so.max_undo, "Undo depth per session")->capture_default_str();
  se->add_option("--step-translation", so.step_translation, "Default nudge (meters)")->capture_default_str();
  se->add_option("--step-rotation", so.step_rotation_deg, "Default nudge (degrees)")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sv) {
      log_seed(err, sv_seed, vp.seed);
      const VirtualViewSet views = sample_virtual_views(parse_mesh(sv_mesh), vp);
      write_virtual_views(views, sv_out);
      err << "wrote " << views.poses.size() << " views to " << sv_out << ".txt/.json\n";
    } else if (*at) {
      log_seed(err, at_seed, tp.ransac.seed);
      const SfmModel model = parse_sfm_text(at_sfm);
      const VirtualViewSet views = read_virtual_views(at_views);
      std::vector<std::string> real = at_real;
      if (!at_real_list.empty()) real = read_lines(at_real_list);
      if (real.empty()) {
        for (const auto& img : model.images) {
          if (!views.index_of(img.name)) real.push_back(img.name);
        }
      }
      if (*at_min_opt) {
        tp.min_match_count = at_min_matches;
        tp.match_counts = read_json(at_matches).get<std::map<std::string, int>>();
      }
      const TextureRichResult r = annotate_texture_rich(model, views, real, tp);
      Json cams = Json::object();
      for (const auto& [name, pose] : r.cameras) cams[name] = pose_to_json(pose);
      const Json report{{"similarity", similarity_to_json(r.report.similarity)},
                        {"inliers", r.report.inlier_count},
                        {"pairs", r.report.inliers.size()},
                        {"rms_center_residual", r.report.rms_center_residual},
                        {"mean_rotation_residual_deg", r.report.mean_rotation_residual * 180 / 3.14159265358979323846},
                        {"iterations", r.report.iterations}};
      const Json result{{"cameras", cams}, {"unregistered", r.unregistered}, {"used_views", r.used_views},
                        {"object_pose", pose_to_json(r.object_pose)}, {"report", report}};
      emit(at_out, dump_canonical(result), out);
      err << "rms center residual: " << r.report.rms_center_residual << " m (" << r.report.inlier_count << "/"
          << r.report.inliers.size() << " inliers)\n";
      if (!r.unregistered.empty()) err << r.unregistered.size() << " real image(s) not registered\n";
    } else if (*ip) {
      const SceneInputs s = load_scene(ip_manifest);
      const PointCloud cloud = fuse_scene(s.manifest, s.cameras, fusion_params(ip_voxel, ip_trunc, ip_max_depth));
      const double distance = *ip_dist_opt ? ip_distance : s.manifest.init_distance;
      const Pose p = rough_scene_pose(s.manifest, s.cameras, cloud, distance);
      err << "fused " << cloud.size() << " points\n";
      emit(ip_out, dump_canonical(pose_to_json(p)), out);
    } else if (*rf) {
      RefinementConfig cfg;
      if (!rf_config.empty()) {
        const Json j = read_json(rf_config);
        cfg = refinement_config_from_json(j.contains("config") ? j.at("config") : j);
      }
      if (*rf_rounds) cfg.rounds = rc.rounds;
      if (*rf_inner) cfg.inner_iterations = rc.inner_iterations;
      if (*rf_step) cfg.step = rc.step;
      if (*rf_soft) cfg.softness = rc.softness;
      if (*rf_pc) cfg.per_camera = rf_per_camera;
      if (*rf_frames_opt) cfg.frames = rf_frames;
      if (*rf_seed) cfg.seed = rc.seed;
      cfg.validate();
      if (cfg.per_camera) log_seed(err, rf_seed, cfg.seed);

      SceneInputs s = load_scene(rf_manifest);
      const TriangleMesh mesh = parse_mesh(s.manifest.resolve(s.manifest.mesh));
      Pose start;
      if (!rf_pose.empty()) {
        start = pose_from_json(read_json(rf_pose));
      } else if (s.manifest.annotation && !rf_init) {
        start = s.manifest.annotation->object_pose;
      } else {
        const PointCloud cloud = fuse_scene(s.manifest, s.cameras, fusion_params(rf_voxel, 4, 0));
        start = rough_scene_pose(s.manifest, s.cameras, cloud, s.manifest.init_distance);
      }
      const auto cams = scene_refinement_cameras(s.manifest, s.cameras, cfg.frames);
      RefinementConfig run_cfg = cfg;
      run_cfg.frames.clear();
      const RefinementResult r = refine_pose(mesh, start, cams, run_cfg);
      err << "hard loss " << r.trace.initial_loss() << " -> " << r.trace.final_loss() << " over "
          << r.trace.losses.size() - 1 << " accepted round(s)\n";
      if (!rf_trace.empty()) {
        const bool csv = fs::path(rf_trace).extension() == ".csv";
        write_file_atomic(rf_trace, csv ? r.trace.to_csv() : dump_canonical(r.trace.to_json()));
      }
      if (rf_save) {
        Annotation a = s.manifest.annotation.value_or(Annotation{});
        a.object_pose = r.pose;
        a.provenance = Provenance::Textureless;
        a.refinement_history.push_back({static_cast<int>(r.trace.losses.size()) - 1, r.trace.initial_loss(),
                                        r.trace.final_loss(), r.trace.frames});
        a.updated_at = utc_timestamp();
        s.manifest.annotation = a;
        save_manifest(s.manifest, s.file);
        err << "saved annotation to " << s.file.string() << "\n";
      }
      emit(rf_out, dump_canonical(pose_to_json(r.pose)), out);
    } else if (*fu) {
      if (fu_out.empty() && fu_points.empty()) {
        throw CLI::RequiredError("fuse needs --out and/or --points");
      }
      const SceneInputs s = load_scene(fu_manifest);
      std::vector<DepthFrame> frames;
      for (std::size_t i = 0; i < s.manifest.frames.size(); ++i) {
        const auto& f = s.manifest.frames[i];
        if (!s.cameras[i] || f.depth.empty()) continue;
        DepthMap d = parse_depth(s.manifest.resolve(f.depth), s.manifest.depth_scale);
        check_dimensions(d.width, d.height, s.manifest.intrinsics, f.depth);
        frames.push_back({std::move(d), *s.cameras[i]});
      }
      if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "no frame has both depth and a camera pose");
      const TsdfVolume v = fuse_frames(frames, s.manifest.intrinsics, fusion_params(fu_voxel, fu_trunc, fu_max_depth));
      if (!fu_out.empty()) save_volume(v, fu_out);
      const PointCloud cloud = extract_points(v);
      if (!fu_points.empty()) write_ply(cloud, fu_points);
      err << "fused " << frames.size() << " frame(s) into " << v.dims()[0] << "x" << v.dims()[1] << "x"
          << v.dims()[2] << " voxels, " << cloud.size() << " surface points\n";
    } else if (*ev) {
      log_seed(err, ev_seed, mp.seed);
      mp.rescale = !ev_no_rescale;
      const MetricReport rep = evaluate_meshes(parse_mesh(ev_pred), parse_mesh(ev_gt), mp);
      emit(ev_out, dump_canonical(rep.to_json()), out);
      if (!ev_csv.empty()) {
        std::ostringstream csv;
        csv << "scene,method,chamfer,tau,precision,recall,f1\n";
        for (const auto& s : rep.scores) {
          csv << ev_scene << ',' << ev_method << ',' << text::format(rep.chamfer) << ',' << text::format(s.tau) << ','
              << text::format(s.precision) << ',' << text::format(s.recall) << ',' << text::format(s.f1) << '\n';
        }
        write_file_atomic(ev_csv, csv.str());
      }
    } else if (*sp) {
      log_seed(err, sp_seed, sp_seed_value);
      std::vector<DatasetEntry> entries;
      std::size_t line_no = 0;
      for (const auto& line : read_lines(sp_input)) {
        ++line_no;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
          throw ParseError(ErrorCode::MalformedLine, sp_input, line_no, "expected 'object_id,category'");
        }
        const std::string id = trim(line.substr(0, comma)), cat = trim(line.substr(comma + 1));
        if (line_no == 1 && id == "object_id" && cat == "category") continue;
        entries.push_back({id, cat});
      }
      const DatasetSplit split = split_dataset(entries, {sp_ratio[0], sp_ratio[1], sp_ratio[2]}, sp_seed_value);
      for (const auto& w : split.warnings) err << "warning: " << w << "\n";
      emit(sp_out, dump_canonical(split.to_json()), out);
    } else if (*va) {
      if (!fs::exists(va_path)) throw Error(ErrorCode::MissingFile, va_path + " does not exist");
      out << dump_canonical(validate_file(va_path, va_kind));
    } else if (*se) {
      so.data_root = se_root;
      AnnotationService svc(so);
      HttpServer server(svc, se_static);
      const int port = server.bind(se_host, se_port);
      err << "serving " << se_root << " on http://" << se_host << ":" << port << "\n";
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    }
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error [" << to_string(e.code()) << "] " << e.file();
    if (e.line()) err << ":" << e.line();
    err << ": " << e.what() << "\n";
    return kExitDomainError;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace posekit
