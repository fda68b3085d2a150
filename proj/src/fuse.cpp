#include "posekit/fuse.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include "posekit/error.hpp"
#include "posekit/manifest.hpp"

namespace posekit {

namespace fs = std::filesystem;

TsdfVolume::TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation)
    : origin_(origin), voxel_(voxel_size), dims_(dims), trunc_(truncation) {
  if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidArgument, "tsdf: voxel size must be positive");
  if (!(truncation > 0)) throw Error(ErrorCode::InvalidArgument, "tsdf: truncation must be positive");
  if (!origin.allFinite()) throw Error(ErrorCode::InvalidArgument, "tsdf: origin must be finite");
  for (int d : dims) {
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "tsdf: grid dimensions must be >= 1");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  tsdf_.assign(n, 1.0);
  weight_.assign(n, 0.0);
}

TsdfVolume TsdfVolume::covering(const Vec3& lo, const Vec3& hi, double voxel_size, double truncation,
                                std::size_t max_voxels) {
  if (!lo.allFinite() || !hi.allFinite() || (hi - lo).minCoeff() < 0) {
    throw Error(ErrorCode::InvalidArgument, "tsdf: bad bounds");
  }
  if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidArgument, "tsdf: voxel size must be positive");
  std::array<int, 3> dims{};
  double total = 1;
  for (int a = 0; a < 3; ++a) {
    const double n = std::ceil((hi(a) - lo(a)) / voxel_size) + 1;
    total *= n;
    if (n > std::numeric_limits<int>::max() || total > static_cast<double>(max_voxels)) {
      throw Error(ErrorCode::InvalidArgument, "tsdf: bounds need more than " + std::to_string(max_voxels) +
                                                  " voxels; raise the voxel size or set a region");
    }
    dims[a] = static_cast<int>(n);
  }
  return TsdfVolume(lo, voxel_size, dims, truncation);
}

void TsdfVolume::integrate(const DepthMap& depth, const Pose& cam_in_world, const CameraIntrinsics& k) {
  if (depth.width != k.width || depth.height != k.height) {
    throw Error(ErrorCode::InvalidArgument, "tsdf: depth map size differs from intrinsics");
  }
  const Mat3 rt = cam_in_world.rotation.transpose();
  const Vec3 cam_origin = -rt * cam_in_world.translation;
  const bool distorted = k.has_distortion();
  for (int z = 0; z < dims_[2]; ++z) {
    for (int y = 0; y < dims_[1]; ++y) {
      for (int x = 0; x < dims_[0]; ++x) {
        const Vec3 pc = rt * center(x, y, z) + cam_origin;
        if (!(pc.z() > 0)) continue;
        Vec2 px(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
        if (distorted) px = distort_pixel(px, k);
        const double u = std::round(px.x()), v = std::round(px.y());
        if (!(u >= 0 && v >= 0 && u < k.width && v < k.height)) continue;
        const double d = depth.at(static_cast<int>(u), static_cast<int>(v));
        if (!(d > 0) || !std::isfinite(d)) continue;
        const double sdf = d - pc.z();
        if (!(sdf > -trunc_)) continue;
        const double value = std::clamp(sdf / trunc_, -1.0, 1.0);
        const std::size_t i = index(x, y, z);
        const double w = weight_[i];
        tsdf_[i] = (tsdf_[i] * w + value) / (w + 1);
        weight_[i] = w + 1;
      }
    }
  }
}

PointCloud extract_points(const TsdfVolume& vol) {
  PointCloud cloud;
  const auto& d = vol.dims();
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        if (!(vol.weight(x, y, z) > 0)) continue;
        const double a = vol.tsdf(x, y, z);
        const int next[3][3] = {{x + 1, y, z}, {x, y + 1, z}, {x, y, z + 1}};
        for (const auto& n : next) {
          if (n[0] >= d[0] || n[1] >= d[1] || n[2] >= d[2]) continue;
          if (!(vol.weight(n[0], n[1], n[2]) > 0)) continue;
          const double b = vol.tsdf(n[0], n[1], n[2]);
          if ((a < 0) == (b < 0)) continue;
          const double t = a / (a - b);
          const Vec3 pa = vol.center(x, y, z);
          cloud.points.push_back(pa + t * (vol.center(n[0], n[1], n[2]) - pa));
        }
      }
    }
  }
  return cloud;
}

std::pair<Vec3, Vec3> observed_bounds(const std::vector<DepthFrame>& frames, const CameraIntrinsics& k,
                                      double margin, double max_depth) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& f : frames) {
    if (f.depth.width != k.width || f.depth.height != k.height) {
      throw Error(ErrorCode::InvalidArgument, "fuse: depth map size differs from intrinsics");
    }
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const double d = f.depth.at(u, v);
        if (!(d > 0) || !std::isfinite(d) || (max_depth > 0 && d > max_depth)) continue;
        Vec2 p(u, v);
        if (k.has_distortion()) p = undistort_pixel(p, k);
        const Vec3 pc(d * (p.x() - k.cx) / k.fx, d * (p.y() - k.cy) / k.fy, d);
        const Vec3 pw = f.cam_in_world * pc;
        lo = lo.cwiseMin(pw);
        hi = hi.cwiseMax(pw);
      }
    }
  }
  if (!(lo.x() <= hi.x())) throw Error(ErrorCode::InvalidArgument, "fuse: no valid depth in any frame");
  return {lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
}

TsdfVolume fuse_frames(const std::vector<DepthFrame>& frames, const CameraIntrinsics& k,
                       const FusionParams& params) {
  if (!(params.voxel_size > 0) || !(params.truncation_voxels > 0)) {
    throw Error(ErrorCode::InvalidArgument, "fuse: voxel size and truncation must be positive");
  }
  const double trunc = params.truncation_voxels * params.voxel_size;
  std::pair<Vec3, Vec3> box;
  if (frames.empty()) {
    if (!params.region) throw Error(ErrorCode::InvalidArgument, "fuse: no frames and no region");
    box = *params.region;
  } else {
    box = observed_bounds(frames, k, trunc, params.max_depth);
    if (params.region) {
      box.first = box.first.cwiseMin(params.region->first);
      box.second = box.second.cwiseMax(params.region->second);
    }
  }
  TsdfVolume vol = TsdfVolume::covering(box.first, box.second, params.voxel_size, trunc);
  for (const auto& f : frames) {
    if (params.max_depth > 0) {
      DepthMap clipped = f.depth;
      for (double& d : clipped.values) {
        if (d > params.max_depth) d = 0;
      }
      vol.integrate(clipped, f.cam_in_world, k);
    } else {
      vol.integrate(f.depth, f.cam_in_world, k);
    }
  }
  return vol;
}

namespace {

void append_le(std::string& out, const std::vector<double>& values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[start + 8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

std::vector<double> read_le(const std::string& in, std::size_t offset, std::size_t count) {
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + 8 * i + b])) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

}  // namespace

void save_volume(const TsdfVolume& vol, const fs::path& file) {
  const auto& o = vol.origin();
  const Json header{{"format", "posekit-tsdf"},
                    {"version", 1},
                    {"origin", {o.x(), o.y(), o.z()}},
                    {"voxel_size", vol.voxel_size()},
                    {"dims", vol.dims()},
                    {"truncation", vol.truncation()},
                    {"layout", "x-fastest; tsdf then weight; float64 little-endian"}};
  std::string out = header.dump() + "\n";
  append_le(out, vol.tsdf_values());
  append_le(out, vol.weights());
  write_file_atomic(file, out);
}

TsdfVolume load_volume(const fs::path& file) {
  const std::string in = read_file(file);
  const std::size_t eol = in.find('\n');
  if (eol == std::string::npos) throw ParseError(ErrorCode::MalformedLine, file.string(), 1, "missing header line");
  TsdfVolume vol;
  try {
    const Json h = Json::parse(in.substr(0, eol));
    if (h.at("format") != "posekit-tsdf" || h.at("version") != 1) {
      throw ParseError(ErrorCode::UnsupportedFormat, file.string(), 1, "not a version-1 tsdf volume");
    }
    const auto& o = h.at("origin");
    vol = TsdfVolume(Vec3(o.at(0), o.at(1), o.at(2)), h.at("voxel_size").get<double>(),
                     h.at("dims").get<std::array<int, 3>>(), h.at("truncation").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ErrorCode::MalformedLine, file.string(), 1, e.what());
  }
  const std::size_t n = vol.size();
  const std::size_t need = eol + 1 + 16 * n;
  if (in.size() < need) throw ParseError(ErrorCode::MalformedLine, file.string(), 2, "volume data truncated");
  if (in.size() > need) throw ParseError(ErrorCode::TrailingGarbage, file.string(), 2, "bytes after volume data");
  vol.tsdf_ = read_le(in, eol + 1, n);
  vol.weight_ = read_le(in, eol + 1 + 8 * n, n);
  return vol;
}

}  // namespace posekit
