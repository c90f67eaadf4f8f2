#pragma once

#include <cstdint>
#include <string>

#include "dvd/pointcloud.hpp"

namespace dvd::cloud {

TriangleMesh make_box(const Vector3d& extents);
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0);
TriangleMesh make_cylinder(double radius, double height, int segments, int height_rings = 4);
TriangleMesh make_torus(double major_radius, double minor_radius, int major_segments,
                        int minor_segments);

/// Smooth asymmetric closed surface: an icosphere with seeded sinusoidal
/// radial bumps and anisotropic scaling. Generic (no symmetries) for almost
/// every seed.
TriangleMesh make_blob(std::uint64_t seed, int subdivisions = 3);

/// Seeded procedural mesh by generator name: "sphere", "box", "cylinder",
/// "torus", or "blob". The seed varies the proportions (and for blobs, the
/// whole shape). Throws InvalidInput for unknown names.
TriangleMesh make_shape(const std::string& generator, std::uint64_t seed);

/// Structured lateral cylinder-shell grid (rings x segments points), centered
/// at the origin with the z axis as the symmetry axis. Exactly invariant
/// under z-rotations by multiples of 2*pi/segments.
PointCloud cylinder_shell_grid(double radius, double height, int rings, int segments);

}  // namespace dvd::cloud
