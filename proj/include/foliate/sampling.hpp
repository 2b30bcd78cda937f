#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "foliate/geometry.hpp"

namespace foliate {

using Rng = std::mt19937_64;

// Fans one master seed out into independent per-purpose seeds.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

Vec random_direction(Rng& rng, Eigen::Index dim);

// Orthonormal basis (columns) of the orthogonal complement of `normal`.
Eigen::MatrixXd complement_basis(const Vec& normal);

// Haar-distributed orthogonal matrix.
Eigen::MatrixXd random_rotation(Eigen::Index dim, Rng& rng);

// i-th element of the van der Corput sequence in `base`.
double radical_inverse(std::uint64_t i, unsigned base);

// Low-discrepancy points in the closed ball of `radius` in R^dim (Halton with
// rejection from the cube). `skip` offsets the sequence so independent draws
// can be taken from one stream.
std::vector<Vec> halton_ball(std::size_t count, Eigen::Index dim, double radius, std::uint64_t skip = 0);

// Closed-ball sample set used for sup-norm checks of holomorphic maps: a
// fraction on the boundary sphere (where the maximum modulus lives) and the
// rest spread through the interior. Deterministic for a given skip.
std::vector<Vec> ball_samples(std::size_t count, Eigen::Index dim, double radius,
                              double boundary_fraction, std::uint64_t skip = 0);

// Uniform random points on the sphere of given radius.
std::vector<Vec> sphere_samples(std::size_t count, Eigen::Index dim, double radius, Rng& rng);

// Concentric-ring sampling of a tangent ball: the center, then nested
// spheres of the (2n-1)-disc with point counts growing like k^(2n-2), the
// outermost ring on the rim. Returns roughly `count` points.
std::vector<Vec> disc_samples(const TangentBall& t, std::size_t count, double phase = 0.0);

}  // namespace foliate
