#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hexlens/mesh.hpp"
#include "hexlens/mesh_io.hpp"

namespace hexlens {

/// Per-cell scaled Jacobian. `degenerate[c]` is set when a corner frame has a
/// zero-length edge; those cells get J = 0.
struct ScaledJacobian {
    std::vector<double> values;
    std::vector<std::uint8_t> degenerate;
};

/// Signed tetrakis volumes. `inverted[c]` is set for negative volumes, which
/// are reported unchanged.
struct CellVolumes {
    std::vector<double> values;
    std::vector<std::uint8_t> inverted;
};

/// Per-vertex values with a flag for vertices where the requested weighting
/// had to fall back (zero total weight, only degenerate cells, isolated vertex).
struct VertexValues {
    std::vector<double> values;
    std::vector<std::uint8_t> fallback;
};

/// Scalar importance attached to cells, vertices and edges. `per_vertex` and
/// `per_edge` are max-aggregations of `per_cell`; `range` is over `per_cell`.
struct AttributeField {
    std::string name;
    std::vector<double> per_cell;
    std::vector<double> per_vertex;
    std::vector<double> per_edge;
    double min = 0.0;
    double max = 0.0;
};

/// min over the 8 corners of det([e1 e2 e3]) with unit corner edge vectors.
ScaledJacobian scaled_jacobian(const HexMesh& mesh);

/// Scaled Jacobian of a single cell given its corner positions.
double scaled_jacobian(const std::array<Vec3, 8>& corners, bool* degenerate = nullptr);

/// Volume from the 24-tetrahedron (tetrakis) decomposition.
CellVolumes cell_volumes(const HexMesh& mesh);
double tetrakis_volume(const std::array<Vec3, 8>& corners);

std::array<Vec3, 8> cell_positions(const HexMesh& mesh, Index c);

Orientation mesh_orientation(const HexMesh& mesh);

/// max over incident cells; isolated vertices get 0 and a fallback flag.
VertexValues vertex_importance(const HexMesh& mesh, std::span<const double> per_cell);

/// sum(V_i a_i) / sum(V_i) over the incident cells of each vertex. Falls back
/// to the unweighted mean when the volumes sum to zero.
VertexValues weighted_vertex_attribute(const HexMesh& mesh, std::span<const double> per_cell,
                                       std::span<const double> volumes);

/// sum(V_i) / sum(V_i / J_i) over incident cells, skipping degenerate cells
/// (J_i == 0). All-degenerate vertices get 0 and a fallback flag.
VertexValues weighted_jacobian_attribute(const HexMesh& mesh, std::span<const double> jacobians,
                                         std::span<const double> volumes);

/// max over edge-incident cells.
std::vector<double> edge_importance(const HexMesh& mesh, std::span<const double> per_cell);

/// Maps a Jacobian field to importance in [0,1]: (max - J) / (max - min),
/// so the most deformed cell is 1. A constant field maps to 0.
std::vector<double> importance_from_jacobian(std::span<const double> jacobians);

/// (a - min) / (max - min); constant fields map to 0.
std::vector<double> importance_from_scalar(std::span<const double> values);

/// Builds the full importance field (cell, vertex and edge aggregation).
AttributeField make_importance_field(const HexMesh& mesh, std::string name, std::vector<double> per_cell_importance);

/// Turns a vertex field into a cell field by averaging cell corners.
std::vector<double> vertex_to_cell(const HexMesh& mesh, std::span<const double> per_vertex);

struct FieldSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::vector<std::size_t> histogram;
};

FieldSummary summarize(std::span<const double> values, std::size_t bins = 32);

}  // namespace hexlens
