#pragma once

#include <cstdint>

#include "hexlens/mesh.hpp"

namespace hexlens {

/// Structured n1 x n2 x n3 grid over [0,n1*h] x [0,n2*h] x [0,n3*h];
/// vertex (i,j,k) has index i + (n1+1)*(j + (n2+1)*k).
HexMesh make_grid(int n1, int n2, int n3, double h = 1.0);

/// Seven-block cube-sphere: an n^3 core cube and six shell blocks of
/// n x n x layers cells reaching a sphere of the given radius. The twelve
/// core edges and the eight radial corner lines are valence-3 edges.
HexMesh make_ball(int n, int layers, double radius = 1.0);

/// L-shaped block (a 2n x 2n x depth grid with one n x n x depth quadrant
/// removed), twisted about the z axis by `twist` radians over its height.
HexMesh make_twisted_l(int n, int depth, double twist);

/// Rotates every vertex about the z axis by an angle growing linearly with z.
HexMesh twist_z(const HexMesh& mesh, double radians_per_unit);

/// Moves interior vertices by a random offset of at most `amplitude` times
/// the mean edge length (boundary vertices stay fixed).
HexMesh jitter_interior(const HexMesh& mesh, double amplitude, std::uint64_t seed);

/// The 4x4x4 demo scene: a grid of edge 1, interior jittered (seed 42),
/// twisted by 0.8 rad over its height. Used by goldens and determinism checks.
HexMesh make_demo_mesh();

/// Desk-scale performance mesh: jittered 7-block ball, 23,625 cells.
HexMesh make_perf_mesh();

}  // namespace hexlens
