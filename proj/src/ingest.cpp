#include "posekit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "posekit/error.hpp"
#include "text.hpp"

namespace posekit {

namespace fs = std::filesystem;

std::string read_file(const fs::path& file) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw ParseError(ErrorCode::MissingFile, file.string(), 0, "file not found");
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(ErrorCode::Io, file.string(), 0, "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& file, const std::string& bytes) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignore;
      fs::remove(tmp, ignore);
      throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// SfM text model

CameraIntrinsics SfmCamera::intrinsics() const {
  const auto& p = params;
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  if (model == "SIMPLE_PINHOLE") {
    k.fx = k.fy = p[0];
    k.cx = p[1];
    k.cy = p[2];
  } else if (model == "PINHOLE") {
    k.fx = p[0];
    k.fy = p[1];
    k.cx = p[2];
    k.cy = p[3];
  } else if (model == "SIMPLE_RADIAL") {
    k.fx = k.fy = p[0];
    k.cx = p[1];
    k.cy = p[2];
    k.distortion[0] = p[3];
  } else if (model == "RADIAL") {
    k.fx = k.fy = p[0];
    k.cx = p[1];
    k.cy = p[2];
    k.distortion[0] = p[3];
    k.distortion[1] = p[4];
  } else if (model == "OPENCV" || model == "FULL_OPENCV") {
    k.fx = p[0];
    k.fy = p[1];
    k.cx = p[2];
    k.cy = p[3];
    k.distortion = {p[4], p[5], p[6], p[7], 0.0};
    if (model == "FULL_OPENCV") {
      if (p[9] != 0.0 || p[10] != 0.0 || p[11] != 0.0) {
        throw Error(ErrorCode::UnknownCameraModel,
                    "FULL_OPENCV with rational terms has no 5-coefficient equivalent");
      }
      k.distortion[4] = p[8];
    }
  } else {
    throw Error(ErrorCode::UnknownCameraModel, "unsupported camera model " + model);
  }
  return k;
}

namespace {

std::optional<std::size_t> camera_param_count(std::string_view model) {
  if (model == "SIMPLE_PINHOLE") return 3;
  if (model == "PINHOLE") return 4;
  if (model == "SIMPLE_RADIAL") return 4;
  if (model == "RADIAL") return 5;
  if (model == "OPENCV") return 8;
  if (model == "FULL_OPENCV") return 12;
  return std::nullopt;
}

Mat3 quaternion_rotation(const std::array<double, 4>& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
}

constexpr double kQuaternionTolerance = 1e-3;

double quaternion_norm(double w, double x, double y, double z) {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

class LineReader {
 public:
  explicit LineReader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(std::size_t line, const std::string& what,
                         ErrorCode code = ErrorCode::MalformedLine) const {
    throw ParseError(code, file_, line, what);
  }

  double number(std::string_view tok, std::size_t line) const {
    auto v = text::to_double(tok);
    if (!v || !std::isfinite(*v)) fail(line, "expected a number, got '" + std::string(tok) + "'");
    return *v;
  }

  template <typename Int>
  Int integer(std::string_view tok, std::size_t line) const {
    auto v = text::to_int<Int>(tok);
    if (!v) fail(line, "expected an integer, got '" + std::string(tok) + "'");
    return *v;
  }

 private:
  std::string file_;
};

}  // namespace

Pose SfmImage::cam_in_world() const {
  const Mat3 r = quaternion_rotation(qvec);
  const Vec3 t(tvec[0], tvec[1], tvec[2]);
  return inverse(Pose(r, t));
}

void SfmImage::set_cam_in_world(const Pose& p) {
  const Pose world_in_cam = inverse(p);
  const Eigen::Quaterniond q = world_in_cam.quaternion();
  qvec = {q.w(), q.x(), q.y(), q.z()};
  tvec = {world_in_cam.translation.x(), world_in_cam.translation.y(),
          world_in_cam.translation.z()};
}

const SfmImage* SfmModel::find_image(const std::string& name) const {
  for (const auto& img : images) {
    if (img.name == name) return &img;
  }
  return nullptr;
}

SfmModel parse_sfm_text(const fs::path& dir) {
  SfmModel model;

  {
    const fs::path path = dir / "cameras.txt";
    const std::string content = read_file(path);
    LineReader r(path.string());
    const auto lines = text::lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::size_t ln = i + 1;
      if (text::is_blank_or_comment(lines[i])) continue;
      const auto tok = text::split(lines[i]);
      if (tok.size() < 4) r.fail(ln, "camera record needs at least 4 fields");
      SfmCamera cam;
      cam.id = r.integer<int>(tok[0], ln);
      cam.model = std::string(tok[1]);
      const auto count = camera_param_count(cam.model);
      if (!count) r.fail(ln, "unknown camera model " + cam.model, ErrorCode::UnknownCameraModel);
      cam.width = r.integer<int>(tok[2], ln);
      cam.height = r.integer<int>(tok[3], ln);
      if (tok.size() != 4 + *count) {
        r.fail(ln, cam.model + " expects " + std::to_string(*count) + " parameters");
      }
      for (std::size_t j = 4; j < tok.size(); ++j) cam.params.push_back(r.number(tok[j], ln));
      if (model.cameras.count(cam.id)) r.fail(ln, "duplicate camera id");
      model.cameras.emplace(cam.id, std::move(cam));
    }
  }

  {
    const fs::path path = dir / "images.txt";
    const std::string content = read_file(path);
    LineReader r(path.string());
    const auto lines = text::lines(content);
    std::size_t i = 0;
    while (i < lines.size()) {
      const std::size_t ln = i + 1;
      if (text::is_blank_or_comment(lines[i])) {
        ++i;
        continue;
      }
      const auto tok = text::split(lines[i]);
      if (tok.size() != 10) r.fail(ln, "image record needs exactly 10 fields");
      SfmImage img;
      img.id = r.integer<int>(tok[0], ln);
      for (int k = 0; k < 4; ++k) img.qvec[k] = r.number(tok[1 + k], ln);
      for (int k = 0; k < 3; ++k) img.tvec[k] = r.number(tok[5 + k], ln);
      img.camera_id = r.integer<int>(tok[8], ln);
      img.name = std::string(tok[9]);
      const double qn = quaternion_norm(img.qvec[0], img.qvec[1], img.qvec[2], img.qvec[3]);
      if (std::abs(qn - 1.0) > kQuaternionTolerance) {
        r.fail(ln, "quaternion norm " + std::to_string(qn), ErrorCode::NonUnitQuaternion);
      }
      if (!model.cameras.count(img.camera_id)) r.fail(ln, "unknown camera id");
      ++i;
      // The observation line follows every record; it may be empty.
      if (i < lines.size()) {
        const std::size_t oln = i + 1;
        const auto obs = text::split(lines[i]);
        if (obs.size() % 3 != 0) r.fail(oln, "observations must be (x, y, point3d_id) triples");
        for (std::size_t j = 0; j < obs.size(); j += 3) {
          img.observations.push_back({r.number(obs[j], oln), r.number(obs[j + 1], oln),
                                      r.integer<std::int64_t>(obs[j + 2], oln)});
        }
        ++i;
      }
      model.images.push_back(std::move(img));
    }
  }

  {
    const fs::path path = dir / "points3D.txt";
    const std::string content = read_file(path);
    LineReader r(path.string());
    const auto lines = text::lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::size_t ln = i + 1;
      if (text::is_blank_or_comment(lines[i])) continue;
      const auto tok = text::split(lines[i]);
      if (tok.size() < 8 || (tok.size() - 8) % 2 != 0) {
        r.fail(ln, "point record needs 8 fields plus (image_id, point2d_idx) pairs");
      }
      SfmPoint pt;
      pt.id = r.integer<std::int64_t>(tok[0], ln);
      for (int k = 0; k < 3; ++k) pt.xyz[k] = r.number(tok[1 + k], ln);
      for (int k = 0; k < 3; ++k) pt.rgb[k] = r.integer<int>(tok[4 + k], ln);
      pt.error = r.number(tok[7], ln);
      for (std::size_t j = 8; j < tok.size(); j += 2) {
        pt.track.push_back({r.integer<int>(tok[j], ln), r.integer<int>(tok[j + 1], ln)});
      }
      model.points.push_back(std::move(pt));
    }
  }
  return model;
}

void write_sfm_text(const SfmModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  using text::format;
  {
    std::ostringstream out;
    out << "# Camera list with one line of data per camera:\n"
        << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
        << "# Number of cameras: " << model.cameras.size() << "\n";
    for (const auto& [id, cam] : model.cameras) {
      out << id << ' ' << cam.model << ' ' << cam.width << ' ' << cam.height;
      for (double p : cam.params) out << ' ' << format(p);
      out << '\n';
    }
    write_file_atomic(dir / "cameras.txt", out.str());
  }
  {
    std::ostringstream out;
    out << "# Image list with two lines of data per image:\n"
        << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
        << "# Number of images: " << model.images.size() << "\n";
    for (const auto& img : model.images) {
      out << img.id;
      for (double q : img.qvec) out << ' ' << format(q);
      for (double t : img.tvec) out << ' ' << format(t);
      out << ' ' << img.camera_id << ' ' << img.name << '\n';
      bool first = true;
      for (const auto& o : img.observations) {
        if (!first) out << ' ';
        first = false;
        out << format(o.x) << ' ' << format(o.y) << ' ' << o.point3d_id;
      }
      out << '\n';
    }
    write_file_atomic(dir / "images.txt", out.str());
  }
  {
    std::ostringstream out;
    out << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n"
        << "# Number of points: " << model.points.size() << "\n";
    for (const auto& pt : model.points) {
      out << pt.id;
      for (double x : pt.xyz) out << ' ' << format(x);
      for (int c : pt.rgb) out << ' ' << c;
      out << ' ' << format(pt.error);
      for (const auto& t : pt.track) out << ' ' << t.image_id << ' ' << t.point2d_idx;
      out << '\n';
    }
    write_file_atomic(dir / "points3D.txt", out.str());
  }
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory parse_trajectory(const fs::path& file) {
  const std::string content = read_file(file);
  LineReader r(file.string());
  Trajectory traj;
  const auto lines = text::lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    if (text::is_blank_or_comment(lines[i])) continue;
    const auto tok = text::split(lines[i]);
    if (tok.size() != 8) r.fail(ln, "expected 'timestamp tx ty tz qx qy qz qw'");
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = r.number(tok[k], ln);
    const double qn = quaternion_norm(v[7], v[4], v[5], v[6]);
    if (std::abs(qn - 1.0) > kQuaternionTolerance) {
      r.fail(ln, "quaternion norm " + std::to_string(qn), ErrorCode::NonUnitQuaternion);
    }
    if (!traj.empty() && !(v[0] > traj.back().timestamp)) {
      r.fail(ln, "timestamps must be strictly increasing", ErrorCode::NonMonotonicTimestamps);
    }
    traj.push_back({v[0], Pose::from_quaternion(Eigen::Quaterniond(v[7], v[4], v[5], v[6]),
                                                Vec3(v[1], v[2], v[3]))});
  }
  return traj;
}

void write_trajectory(const Trajectory& traj, const fs::path& file) {
  using text::format;
  std::ostringstream out;
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& e : traj) {
    const auto& t = e.cam_in_world.translation;
    const auto q = e.cam_in_world.quaternion();
    out << format(e.timestamp) << ' ' << format(t.x()) << ' ' << format(t.y()) << ' '
        << format(t.z()) << ' ' << format(q.x()) << ' ' << format(q.y()) << ' '
        << format(q.z()) << ' ' << format(q.w()) << '\n';
  }
  write_file_atomic(file, out.str());
}

// ---------------------------------------------------------------------------
// Meshes

double TriangleMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles[i];
  const Vec3& a = vertices[t[0]];
  const Vec3& b = vertices[t[1]];
  const Vec3& c = vertices[t[2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

std::size_t TriangleMesh::remove_degenerate(double min_area) {
  const std::size_t before = triangles.size();
  std::vector<std::array<int, 3>> kept;
  kept.reserve(before);
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    if (triangle_area(i) > min_area) kept.push_back(triangles[i]);
  }
  triangles = std::move(kept);
  return before - triangles.size();
}

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (int v : triangles[i]) {
      if (v < 0 || v >= n) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "triangle " + std::to_string(i) + " references vertex " +
                        std::to_string(v) + " of " + std::to_string(n));
      }
    }
  }
  if (!colors.empty() && colors.size() != vertices.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vertex color count differs from vertex count");
  }
}

std::pair<Vec3, Vec3> TriangleMesh::bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

namespace {

struct RawMesh {
  std::vector<Vec3> vertices;
  std::vector<Rgb> colors;
  std::vector<std::vector<long long>> faces;  // 0-based, unchecked
  bool has_faces_element = false;
};

std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(unit * 255.0), 0L, 255L));
}

RawMesh parse_obj(const std::string& content, const std::string& name) {
  LineReader r(name);
  RawMesh mesh;
  bool any_color = false;
  const auto lines = text::lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    if (text::is_blank_or_comment(lines[i])) continue;
    const auto tok = text::split(lines[i]);
    const std::string_view key = tok[0];
    if (key == "v") {
      if (tok.size() != 4 && tok.size() != 5 && tok.size() != 7) {
        r.fail(ln, "vertex record needs x y z [w] or x y z r g b");
      }
      Vec3 p(r.number(tok[1], ln), r.number(tok[2], ln), r.number(tok[3], ln));
      Rgb c{0, 0, 0};
      if (tok.size() == 5) {
        const double w = r.number(tok[4], ln);
        if (w == 0.0) r.fail(ln, "vertex weight is zero");
        p /= w;
      } else if (tok.size() == 7) {
        any_color = true;
        c = {to_byte(r.number(tok[4], ln)), to_byte(r.number(tok[5], ln)),
             to_byte(r.number(tok[6], ln))};
      }
      mesh.vertices.push_back(p);
      mesh.colors.push_back(c);
    } else if (key == "f") {
      if (tok.size() < 4) r.fail(ln, "face needs at least 3 vertices");
      std::vector<long long> face;
      for (std::size_t j = 1; j < tok.size(); ++j) {
        const std::string_view idx = tok[j].substr(0, tok[j].find('/'));
        const long long v = r.integer<long long>(idx, ln);
        if (v == 0) r.fail(ln, "OBJ indices are 1-based", ErrorCode::IndexOutOfRange);
        const long long n = static_cast<long long>(mesh.vertices.size());
        face.push_back(v > 0 ? v - 1 : n + v);
      }
      mesh.faces.push_back(std::move(face));
    } else if (key == "vt" || key == "vn" || key == "vp" || key == "g" || key == "o" ||
               key == "s" || key == "usemtl" || key == "mtllib" || key == "l") {
      continue;
    } else {
      r.fail(ln, "unsupported OBJ record '" + std::string(key) + "'");
    }
  }
  if (!any_color) mesh.colors.clear();
  return mesh;
}

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(std::string_view s) {
  if (s == "char" || s == "int8") return PlyType::I8;
  if (s == "uchar" || s == "uint8") return PlyType::U8;
  if (s == "short" || s == "int16") return PlyType::I16;
  if (s == "ushort" || s == "uint16") return PlyType::U16;
  if (s == "int" || s == "int32") return PlyType::I32;
  if (s == "uint" || s == "uint32") return PlyType::U32;
  if (s == "float" || s == "float32") return PlyType::F32;
  if (s == "double" || s == "float64") return PlyType::F64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::I8:
    case PlyType::U8: return 1;
    case PlyType::I16:
    case PlyType::U16: return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32: return 4;
    case PlyType::F64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::F32;
  bool is_list = false;
  PlyType count_type = PlyType::U8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

class BinaryCursor {
 public:
  BinaryCursor(const std::string& data, std::size_t pos, const std::string& name)
      : data_(data), pos_(pos), name_(name) {}

  double read(PlyType t) {
    const std::size_t n = ply_size(t);
    if (pos_ + n > data_.size()) {
      throw ParseError(ErrorCode::MalformedLine, name_, 0, "binary PLY body is truncated");
    }
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    switch (t) {
      case PlyType::I8: return static_cast<std::int8_t>(bits);
      case PlyType::U8: return static_cast<std::uint8_t>(bits);
      case PlyType::I16: return static_cast<std::int16_t>(bits);
      case PlyType::U16: return static_cast<std::uint16_t>(bits);
      case PlyType::I32: return static_cast<std::int32_t>(bits);
      case PlyType::U32: return static_cast<std::uint32_t>(bits);
      case PlyType::F32: {
        std::uint32_t b = static_cast<std::uint32_t>(bits);
        float f;
        std::memcpy(&f, &b, 4);
        return f;
      }
      case PlyType::F64: {
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
      }
    }
    return 0;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::size_t pos_;
  const std::string& name_;
};

RawMesh parse_ply(const std::string& content, const std::string& name) {
  LineReader r(name);
  std::size_t pos = 0;
  std::size_t ln = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) r.fail(ln + 1, "unterminated PLY header");
    std::string_view line(content.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++ln;
    return line;
  };

  if (next_line() != "ply") r.fail(1, "missing 'ply' magic", ErrorCode::UnsupportedFormat);
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string_view line = next_line();
    const auto tok = text::split(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) r.fail(ln, "bad format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        r.fail(ln, "unsupported PLY format " + std::string(tok[1]), ErrorCode::UnsupportedFormat);
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) r.fail(ln, "bad element line");
      elements.push_back({std::string(tok[1]), r.integer<std::size_t>(tok[2], ln), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) r.fail(ln, "property before element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = ply_type(tok[2]);
        const auto it = ply_type(tok[3]);
        if (!ct || !it) r.fail(ln, "unknown PLY type");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) r.fail(ln, "unknown PLY type " + std::string(tok[1]));
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        r.fail(ln, "bad property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      r.fail(ln, "unexpected header line");
    }
  }
  if (!have_format) r.fail(ln, "missing format line", ErrorCode::UnsupportedFormat);

  RawMesh mesh;
  bool any_color = false;

  auto handle = [&](const PlyElement& el, const std::vector<std::vector<double>>& values) {
    if (el.name == "vertex") {
      double xyz[3] = {0, 0, 0};
      bool have[3] = {false, false, false};
      Rgb c{0, 0, 0};
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const auto& prop = el.properties[p];
        if (prop.is_list) continue;
        const double v = values[p][0];
        if (prop.name == "x") xyz[0] = v, have[0] = true;
        if (prop.name == "y") xyz[1] = v, have[1] = true;
        if (prop.name == "z") xyz[2] = v, have[2] = true;
        const int ci = prop.name == "red" ? 0 : prop.name == "green" ? 1 : prop.name == "blue" ? 2 : -1;
        if (ci >= 0) {
          any_color = true;
          c[ci] = prop.type == PlyType::U8 ? static_cast<std::uint8_t>(v) : to_byte(v);
        }
      }
      if (!have[0] || !have[1] || !have[2]) r.fail(0, "vertex element lacks x/y/z");
      mesh.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
      mesh.colors.push_back(c);
    } else if (el.name == "face") {
      mesh.has_faces_element = true;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const auto& prop = el.properties[p];
        if (prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
          std::vector<long long> face;
          for (double v : values[p]) face.push_back(static_cast<long long>(v));
          if (face.size() < 3) r.fail(0, "face with fewer than 3 vertices");
          mesh.faces.push_back(std::move(face));
        }
      }
    }
  };

  if (binary) {
    BinaryCursor cur(content, pos, name);
    for (const auto& el : elements) {
      for (std::size_t i = 0; i < el.count; ++i) {
        std::vector<std::vector<double>> values(el.properties.size());
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const double n = cur.read(prop.count_type);
            if (n < 0) r.fail(0, "negative list length");
            for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
              values[p].push_back(cur.read(prop.type));
            }
          } else {
            values[p].push_back(cur.read(prop.type));
          }
        }
        handle(el, values);
      }
    }
    if (cur.remaining() != 0) {
      throw ParseError(ErrorCode::TrailingGarbage, name, 0,
                       std::to_string(cur.remaining()) + " bytes after PLY body");
    }
  } else {
    const auto lines = text::lines(std::string_view(content).substr(pos));
    std::size_t li = 0;
    auto next_data = [&]() {
      while (li < lines.size() && text::split(lines[li]).empty()) ++li;
      if (li >= lines.size()) r.fail(ln + li + 1, "PLY body is truncated");
      return li++;
    };
    for (const auto& el : elements) {
      for (std::size_t i = 0; i < el.count; ++i) {
        const std::size_t idx = next_data();
        const std::size_t dln = ln + idx + 1;
        const auto tok = text::split(lines[idx]);
        std::size_t t = 0;
        std::vector<std::vector<double>> values(el.properties.size());
        auto take = [&]() {
          if (t >= tok.size()) r.fail(dln, "too few values");
          return r.number(tok[t++], dln);
        };
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const double n = take();
            if (n < 0 || n != std::floor(n)) r.fail(dln, "bad list length");
            for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) values[p].push_back(take());
          } else {
            values[p].push_back(take());
          }
        }
        if (t != tok.size()) r.fail(dln, "extra values on line", ErrorCode::TrailingGarbage);
        handle(el, values);
      }
    }
    for (; li < lines.size(); ++li) {
      if (!text::split(lines[li]).empty()) {
        r.fail(ln + li + 1, "data after PLY body", ErrorCode::TrailingGarbage);
      }
    }
  }
  if (!any_color) mesh.colors.clear();
  return mesh;
}

RawMesh parse_raw_mesh(const fs::path& file) {
  const std::string content = read_file(file);
  if (content.rfind("ply", 0) == 0) return parse_ply(content, file.string());
  std::string ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".obj") return parse_obj(content, file.string());
  throw ParseError(ErrorCode::UnsupportedFormat, file.string(), 0,
                   "expected a PLY or OBJ file");
}

}  // namespace

TriangleMesh parse_mesh(const fs::path& file) {
  RawMesh raw = parse_raw_mesh(file);
  TriangleMesh mesh;
  mesh.vertices = std::move(raw.vertices);
  mesh.colors = std::move(raw.colors);
  const long long n = static_cast<long long>(mesh.vertices.size());
  for (std::size_t f = 0; f < raw.faces.size(); ++f) {
    const auto& face = raw.faces[f];
    for (long long v : face) {
      if (v < 0 || v >= n) {
        throw ParseError(ErrorCode::IndexOutOfRange, file.string(), 0,
                         "face " + std::to_string(f) + " references vertex " +
                             std::to_string(v) + " of " + std::to_string(n));
      }
    }
    for (std::size_t k = 1; k + 1 < face.size(); ++k) {
      mesh.triangles.push_back({static_cast<int>(face[0]), static_cast<int>(face[k]),
                                static_cast<int>(face[k + 1])});
    }
  }
  mesh.remove_degenerate();
  return mesh;
}

PointCloud parse_point_cloud(const fs::path& file) {
  RawMesh raw = parse_raw_mesh(file);
  PointCloud cloud;
  cloud.points = std::move(raw.vertices);
  cloud.colors = std::move(raw.colors);
  return cloud;
}

void write_obj(const TriangleMesh& mesh, const fs::path& file) {
  using text::format;
  std::ostringstream out;
  const bool colored = !mesh.colors.empty();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << "v " << format(v.x()) << ' ' << format(v.y()) << ' ' << format(v.z());
    if (colored) {
      for (auto c : mesh.colors[i]) out << ' ' << format(c / 255.0);
    }
    out << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  write_file_atomic(file, out.str());
}

namespace {

void append_le(std::string& out, const void* data, std::size_t n) {
  // Hosts this builds on are little-endian; PLY binary_little_endian matches.
  out.append(static_cast<const char*>(data), n);
}

}  // namespace

void write_ply(const TriangleMesh& mesh, const fs::path& file, bool binary) {
  using text::format;
  const bool colored = !mesh.colors.empty();
  std::ostringstream header;
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
         << "element vertex " << mesh.vertices.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n";
  if (colored) header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header << "element face " << mesh.triangles.size() << "\n"
         << "property list uchar int vertex_indices\nend_header\n";
  std::string out = header.str();
  if (binary) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const double d = mesh.vertices[i][k];
        append_le(out, &d, 8);
      }
      if (colored) append_le(out, mesh.colors[i].data(), 3);
    }
    for (const auto& t : mesh.triangles) {
      const std::uint8_t n = 3;
      append_le(out, &n, 1);
      for (int v : t) {
        const std::int32_t iv = v;
        append_le(out, &iv, 4);
      }
    }
  } else {
    std::ostringstream body;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const auto& v = mesh.vertices[i];
      body << format(v.x()) << ' ' << format(v.y()) << ' ' << format(v.z());
      if (colored) {
        for (auto c : mesh.colors[i]) body << ' ' << static_cast<int>(c);
      }
      body << '\n';
    }
    for (const auto& t : mesh.triangles) body << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out += body.str();
  }
  write_file_atomic(file, out);
}

void write_ply(const PointCloud& cloud, const fs::path& file) {
  using text::format;
  const bool colored = !cloud.colors.empty();
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (colored) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format(p.x()) << ' ' << format(p.y()) << ' ' << format(p.z());
    if (colored) {
      for (auto c : cloud.colors[i]) out << ' ' << static_cast<int>(c);
    }
    out << '\n';
  }
  write_file_atomic(file, out.str());
}

// ---------------------------------------------------------------------------
// Netpbm images

namespace {

struct Netpbm {
  int channels = 1;
  int width = 0, height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

Netpbm parse_netpbm_header(const std::string& content, const std::string& name) {
  Netpbm h;
  if (content.size() < 2 || content[0] != 'P' || (content[1] != '5' && content[1] != '6')) {
    throw ParseError(ErrorCode::UnsupportedFormat, name, 0, "expected a binary P5/P6 netpbm image");
  }
  h.channels = content[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  int fields[3];
  for (int f = 0; f < 3; ++f) {
    for (;;) {
      while (pos < content.size() && std::isspace(static_cast<unsigned char>(content[pos]))) ++pos;
      if (pos < content.size() && content[pos] == '#') {
        while (pos < content.size() && content[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < content.size() && std::isdigit(static_cast<unsigned char>(content[pos]))) ++pos;
    auto v = text::to_int<int>(std::string_view(content).substr(start, pos - start));
    if (!v || *v <= 0) throw ParseError(ErrorCode::MalformedLine, name, 0, "bad netpbm header");
    fields[f] = *v;
  }
  if (pos >= content.size() || !std::isspace(static_cast<unsigned char>(content[pos]))) {
    throw ParseError(ErrorCode::MalformedLine, name, 0, "bad netpbm header terminator");
  }
  h.width = fields[0];
  h.height = fields[1];
  h.maxval = fields[2];
  if (h.maxval > 65535) throw ParseError(ErrorCode::MalformedLine, name, 0, "maxval exceeds 65535");
  h.data_offset = pos + 1;
  const std::size_t bytes = static_cast<std::size_t>(h.width) * h.height * h.channels *
                            (h.maxval > 255 ? 2 : 1);
  const std::size_t available = content.size() - h.data_offset;
  if (available < bytes) throw ParseError(ErrorCode::MalformedLine, name, 0, "pixel data is truncated");
  if (available > bytes) {
    throw ParseError(ErrorCode::TrailingGarbage, name, 0,
                     std::to_string(available - bytes) + " bytes after pixel data");
  }
  return h;
}

unsigned sample(const std::string& content, const Netpbm& h, std::size_t index) {
  if (h.maxval > 255) {
    const auto* p = reinterpret_cast<const unsigned char*>(content.data() + h.data_offset + 2 * index);
    return (static_cast<unsigned>(p[0]) << 8) | p[1];
  }
  return static_cast<unsigned char>(content[h.data_offset + index]);
}

}  // namespace

double Mask::foreground_area() const {
  double s = 0;
  for (float v : values) s += v;
  return s;
}

bool Mask::any() const {
  return std::any_of(values.begin(), values.end(), [](float v) { return v > 0.f; });
}

Mask parse_mask(const fs::path& file, std::optional<double> threshold) {
  const std::string content = read_file(file);
  const Netpbm h = parse_netpbm_header(content, file.string());
  if (h.maxval > 255) {
    throw ParseError(ErrorCode::UnsupportedFormat, file.string(), 0, "masks must be 8-bit");
  }
  Mask m(h.width, h.height);
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = 0;
    for (int c = 0; c < h.channels; ++c) v = std::max(v, sample(content, h, i * h.channels + c));
    double value = static_cast<double>(v) / h.maxval;
    if (threshold) value = value >= *threshold ? 1.0 : 0.0;
    m.values[i] = static_cast<float>(value);
  }
  return m;
}

DepthMap parse_depth(const fs::path& file, double scale) {
  const std::string content = read_file(file);
  const Netpbm h = parse_netpbm_header(content, file.string());
  if (h.channels != 1 || h.maxval <= 255) {
    throw ParseError(ErrorCode::UnsupportedFormat, file.string(), 0,
                     "depth maps must be 16-bit P5 graymaps");
  }
  DepthMap d(h.width, h.height);
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = sample(content, h, i) * scale;
  return d;
}

void write_mask(const Mask& mask, const fs::path& file) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.reserve(out.size() + mask.values.size());
  for (float v : mask.values) {
    out.push_back(static_cast<char>(std::clamp(std::lround(v * 255.0), 0L, 255L)));
  }
  write_file_atomic(file, out);
}

void write_depth(const DepthMap& depth, const fs::path& file, double scale) {
  std::string out =
      "P5\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n65535\n";
  for (double v : depth.values) {
    const long q = std::clamp(std::lround(v / scale), 0L, 65535L);
    out.push_back(static_cast<char>((q >> 8) & 0xff));
    out.push_back(static_cast<char>(q & 0xff));
  }
  write_file_atomic(file, out);
}

void check_dimensions(int width, int height, const CameraIntrinsics& k, const std::string& what) {
  if (width != k.width || height != k.height) {
    throw Error(ErrorCode::DimensionMismatch,
                what + " is " + std::to_string(width) + "x" + std::to_string(height) +
                    " but intrinsics expect " + std::to_string(k.width) + "x" +
                    std::to_string(k.height));
  }
}

}  // namespace posekit
