#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexlens/vec.hpp"

namespace hexlens {

using Index = std::uint32_t;

/*
 * Corner ordering follows the VTK hexahedron: the bottom quad 0-1-2-3 is
 * counter-clockwise when seen from above, the top quad 4-5-6-7 sits over it.
 *
 *        7-------6
 *       /|      /|
 *      4-------5 |
 *      | 3-----|-2
 *      |/      |/
 *      0-------1
 */
using CellCorners = std::array<Index, 8>;

namespace hex {
/// Local edges grouped into the three classes of topologically parallel
/// edges: 0..3 along 0->1, 4..7 along 0->3, 8..11 along 0->4.
inline constexpr std::array<std::array<int, 2>, 12> kEdges{{
    {0, 1}, {3, 2}, {4, 5}, {7, 6},
    {0, 3}, {1, 2}, {4, 7}, {5, 6},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};
inline constexpr int edge_class(int local_edge) { return local_edge / 4; }

/// Local faces with outward orientation (right-hand normal points out).
inline constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 3, 2, 1}, {4, 5, 6, 7},
    {0, 1, 5, 4}, {3, 7, 6, 2},
    {0, 4, 7, 3}, {1, 2, 6, 5},
}};

/// For every corner, its three edge neighbours ordered so that the frame is
/// right-handed on an undeformed cell.
inline constexpr std::array<std::array<int, 3>, 8> kCornerFrames{{
    {1, 3, 4}, {2, 0, 5}, {3, 1, 6}, {0, 2, 7},
    {7, 5, 0}, {4, 6, 1}, {5, 7, 2}, {6, 4, 3},
}};
}  // namespace hex

/// Thrown for inconsistent cell input (duplicate/degenerate cells, bad indices).
class TopologyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Compressed adjacency list (row offsets + flat values).
struct Csr {
    std::vector<Index> offsets{0};
    std::vector<Index> values;

    std::span<const Index> operator[](std::size_t row) const {
        return {values.data() + offsets[row], values.data() + offsets[row + 1]};
    }
    std::size_t rows() const { return offsets.size() - 1; }
    std::size_t count(std::size_t row) const { return offsets[row + 1] - offsets[row]; }
};

/// Immutable hexahedral mesh with derived topology.
///
/// Edges are keyed by their sorted vertex pair and faces by their sorted
/// vertex quadruple; both lists are sorted by key so indices are reproducible.
/// A face keeps the corner order of the first cell (in cell order) that
/// references it.
class HexMesh {
public:
    HexMesh() = default;

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_cells() const { return cells_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    std::size_t num_faces() const { return faces_.size(); }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<CellCorners>& cells() const { return cells_; }
    const std::vector<std::array<Index, 2>>& edges() const { return edges_; }
    const std::vector<std::array<Index, 4>>& faces() const { return faces_; }

    const Vec3& vertex(Index v) const { return vertices_[v]; }
    const CellCorners& cell(Index c) const { return cells_[c]; }
    const std::array<Index, 2>& edge(Index e) const { return edges_[e]; }
    const std::array<Index, 4>& face(Index f) const { return faces_[f]; }

    /// Edge indices of a cell, in local edge order (see hex::kEdges).
    const std::array<Index, 12>& cell_edges(Index c) const { return cell_edges_[c]; }
    /// Face indices of a cell, in local face order (see hex::kFaces).
    const std::array<Index, 6>& cell_faces(Index c) const { return cell_faces_[c]; }
    /// Edge indices of a face; entry i joins face corners i and i+1.
    const std::array<Index, 4>& face_edges(Index f) const { return face_edges_[f]; }

    std::span<const Index> edge_cells(Index e) const { return edge_cells_[e]; }
    std::span<const Index> face_cells(Index f) const { return face_cells_[f]; }
    std::span<const Index> vertex_cells(Index v) const { return vertex_cells_[v]; }
    std::span<const Index> edge_faces(Index e) const { return edge_faces_[e]; }

    std::size_t edge_valence(Index e) const { return edge_cells_.count(e); }
    bool is_boundary_face(Index f) const { return face_cells_.count(f) == 1; }
    bool is_boundary_edge(Index e) const { return edge_boundary_[e] != 0; }
    bool is_boundary_vertex(Index v) const { return vertex_boundary_[v] != 0; }

    /// Index of `e` within cell `c` (0..11) or -1.
    int local_edge(Index c, Index e) const;
    /// Index of `f` within cell `c` (0..5) or -1.
    int local_face(Index c, Index f) const;
    /// The cell across face `f` from cell `c`, or -1 for boundary faces.
    std::int64_t opposite_cell(Index f, Index c) const;

    Aabb bounds() const;
    double mean_edge_length() const;

    /// True when hanging vertices (T-junctions) were detected on the
    /// boundary surface. The mesh is still usable.
    bool non_conforming() const { return non_conforming_; }

    friend HexMesh build_topology(std::vector<Vec3> vertices, std::vector<CellCorners> cells);

private:
    std::vector<Vec3> vertices_;
    std::vector<CellCorners> cells_;
    std::vector<std::array<Index, 2>> edges_;
    std::vector<std::array<Index, 4>> faces_;
    std::vector<std::array<Index, 12>> cell_edges_;
    std::vector<std::array<Index, 6>> cell_faces_;
    std::vector<std::array<Index, 4>> face_edges_;
    Csr edge_cells_, face_cells_, vertex_cells_, edge_faces_;
    std::vector<std::uint8_t> edge_boundary_, vertex_boundary_;
    bool non_conforming_ = false;
};

/// Builds edges, faces and all incidence maps. Throws TopologyError for
/// out-of-range indices, cells with repeated corners, duplicate cells and
/// faces shared by more than two cells.
HexMesh build_topology(std::vector<Vec3> vertices, std::vector<CellCorners> cells);

enum class EdgeValenceClass {
    Regular,
    Valence1,   // frame edge, never hidden by the LoD
    Singular,   // any other irregular valence
};

struct EdgeValence {
    Index edge = 0;
    std::size_t valence = 0;
    bool boundary = false;
    EdgeValenceClass kind = EdgeValenceClass::Regular;
};

/// Classifies an edge: regular iff (boundary, valence) is (true, 2) or (false, 4).
EdgeValence classify_edge(const HexMesh& mesh, Index e);

/// All irregular edges in ascending edge order.
std::vector<EdgeValence> singular_edges(const HexMesh& mesh);

/// The other three members of `e`'s parallel class inside cell `c`.
std::array<Index, 3> topologically_parallel_edges(const HexMesh& mesh, Index c, Index e);

/// Number of boundary vertices lying strictly inside a boundary edge they do
/// not belong to.
std::size_t count_hanging_vertices(const HexMesh& mesh, double rel_tolerance = 1e-9);

}  // namespace hexlens
