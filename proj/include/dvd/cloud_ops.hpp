#pragma once

#include <cstdint>
#include <tuple>

#include "dvd/pointcloud.hpp"

namespace dvd::cloud {

/// Area-uniform surface sampling; per-point normals are the face normals.
/// Deterministic per seed. Throws InvalidInput when the mesh has no face of
/// positive area or n < 1.
PointCloud sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed);

/// Centers the cloud at its barycenter and scales so the max point norm is 1.
/// Returns (cloud, center, scale); the inverse is p*scale + center.
/// Throws InvalidInput when all points coincide.
std::tuple<PointCloud, Vector3d, double> normalize_unit_sphere(const PointCloud& cloud);

/// Shape-level counterpart: centers the mesh at its vertex barycenter and
/// scales the vertices so the max vertex norm is 1. Clouds sampled from the
/// result share one frame, so a rigid transform relates them exactly.
TriangleMesh normalize_mesh_unit_sphere(const TriangleMesh& mesh);

/// I.i.d. zero-mean isotropic Gaussian offset per point; normals unchanged.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed);

/// Keeps the ceil(keep_fraction*N) points most aligned with a random view
/// direction (half-space visibility proxy). Retained points keep their
/// original relative order. keep_fraction must be in (0, 1].
PointCloud crop_partial(const PointCloud& cloud, double keep_fraction, std::uint64_t seed);

/// Per-point unit normal from the least-eigenvalue eigenvector of the
/// covariance of the point's k nearest neighbors; sign fixed outward from the
/// barycenter. Requires N > k >= 3.
PointCloud estimate_normals_pca(const PointCloud& cloud, int k);

}  // namespace dvd::cloud
