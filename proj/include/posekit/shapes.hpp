#pragma once

#include "posekit/ingest.hpp"

namespace posekit {

/// Axis-aligned box centered at the origin, 8 vertices and 12 outward-facing
/// triangles.
TriangleMesh make_box(const Vec3& size);
inline TriangleMesh make_unit_cube() { return make_box(Vec3::Ones()); }

/// Box whose faces are split into an n x n grid of quads (12 n^2 triangles).
TriangleMesh make_subdivided_box(const Vec3& size, int n);

/// Icosahedron refined `subdivisions` times and projected onto the sphere;
/// 20 * 4^subdivisions triangles.
TriangleMesh make_icosphere(double radius, int subdivisions);

/// Two-triangle square in the z = 0 plane, facing +z.
TriangleMesh make_square(double side);

TriangleMesh transformed(const TriangleMesh& mesh, const Pose& p);

}  // namespace posekit
