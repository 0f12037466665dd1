#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hexlens/mesh.hpp"

namespace hexlens {

/// Cells connected through one class of topologically parallel edges.
struct Sheet {
    Index id = 0;
    std::vector<Index> cells;  // sorted
    std::vector<Index> edges;  // sorted; every edge belongs to exactly one sheet
};

/// Extracts all sheets. Seeds are taken in ascending edge order; propagation
/// crosses shared edges (each cell incident to a frontier edge joins the sheet
/// and contributes the three edges parallel to it).
std::vector<Sheet> extract_sheets(const HexMesh& mesh);

struct SheetComponent {
    Index id = 0;
    std::vector<Index> cells;            // sorted
    std::vector<Index> boundary_faces;   // sorted; faces with exactly one incident component cell
    std::vector<Index> sheets;           // constituent sheet ids
};

SheetComponent make_component(const HexMesh& mesh, Index id, std::vector<Index> cells, std::vector<Index> sheets = {});

/// Ordered by merge priority: adjacent > hybrid > intersecting > none.
enum class Relation : int { None = 0, Intersecting = 1, Hybrid = 2, Adjacent = 3 };

const char* to_string(Relation r);

struct RelationInfo {
    Relation relation = Relation::None;
    std::size_t shared_cells = 0;
    /// Faces on both component boundaries that become interior after the merge.
    std::size_t shared_faces = 0;
};

/// Throws std::invalid_argument when both components carry the same id.
RelationInfo classify_relation(const HexMesh& mesh, const SheetComponent& a, const SheetComponent& b);

/// Exact rational merge priority
///   shared_faces / (|dA| + |dB|) * 1 / (|A| + |B|)
/// kept in lowest terms so equal weights compare equal.
struct MergeWeight {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
    std::strong_ordering operator<=>(const MergeWeight& o) const;
    bool operator==(const MergeWeight& o) const { return (*this <=> o) == 0; }
};

MergeWeight make_weight(std::uint64_t shared_faces, std::uint64_t boundary_sum, std::uint64_t cell_sum);
MergeWeight merge_weight(const HexMesh& mesh, const SheetComponent& a, const SheetComponent& b);

struct MergeRecord {
    Index first = 0;    // lower component id
    Index second = 0;   // higher component id
    Index merged = 0;   // id of the new component
    Relation relation = Relation::None;
    MergeWeight weight;
    int level = 0;      // LoD level whose merges this belongs to
    std::size_t merged_cells = 0;
    std::size_t hidden_edges = 0;

    bool operator==(const MergeRecord&) const = default;
};

struct LodEdgeStructure {
    /// Highest level at which each edge is still drawn.
    std::vector<int> edge_level;
    int level_count = 1;
    std::size_t initial_components = 0;
    std::vector<MergeRecord> merges;
    double build_seconds = 0.0;

    bool visible(Index e, int level) const { return edge_level[e] >= level; }
    std::vector<Index> visible_edges(int level) const;
};

/// Merges sheet components pairwise until one is left (or no pair has a
/// relation) and assigns every edge its LoD level. Valence-1 edges are never
/// hidden; other singular edges are hidden only at the coarsest level.
LodEdgeStructure build_lod(const HexMesh& mesh, std::span<const Sheet> sheets);

/// Initial components as used by build_lod: one per distinct sheet cell set,
/// in sheet order.
std::vector<SheetComponent> initial_components(const HexMesh& mesh, std::span<const Sheet> sheets);

/// OBJ line set: all vertices, then one group `lod_<L>` per level holding
/// the edges whose e_level is L.
void write_lod_obj(std::ostream& out, const HexMesh& mesh, const LodEdgeStructure& lod);

/// JSON merge log.
std::string merge_log_json(const LodEdgeStructure& lod, int indent = 2);

}  // namespace hexlens
