#include "hexlens/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace hexlens {

namespace {

Csr build_csr(std::size_t rows, const std::vector<std::pair<Index, Index>>& pairs) {
    Csr csr;
    csr.offsets.assign(rows + 1, 0);
    for (const auto& [row, value] : pairs) csr.offsets[row + 1]++;
    std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
    csr.values.resize(pairs.size());
    std::vector<Index> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (const auto& [row, value] : pairs) csr.values[cursor[row]++] = value;
    for (std::size_t r = 0; r < rows; ++r) {
        std::sort(csr.values.begin() + csr.offsets[r], csr.values.begin() + csr.offsets[r + 1]);
        auto last = std::unique(csr.values.begin() + csr.offsets[r], csr.values.begin() + csr.offsets[r + 1]);
        // duplicates cannot appear for our inputs; keep the row contiguous anyway
        if (last != csr.values.begin() + csr.offsets[r + 1]) throw TopologyError("duplicate incidence entry");
    }
    return csr;
}

}  // namespace

int HexMesh::local_edge(Index c, Index e) const {
    const auto& ce = cell_edges_[c];
    for (int i = 0; i < 12; ++i)
        if (ce[i] == e) return i;
    return -1;
}

int HexMesh::local_face(Index c, Index f) const {
    const auto& cf = cell_faces_[c];
    for (int i = 0; i < 6; ++i)
        if (cf[i] == f) return i;
    return -1;
}

std::int64_t HexMesh::opposite_cell(Index f, Index c) const {
    auto cells = face_cells(f);
    if (cells.size() != 2) return -1;
    return cells[0] == c ? cells[1] : cells[0];
}

Aabb HexMesh::bounds() const {
    Aabb box;
    for (const auto& v : vertices_) box.extend(v);
    return box;
}

double HexMesh::mean_edge_length() const {
    if (edges_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& e : edges_) sum += length(vertices_[e[1]] - vertices_[e[0]]);
    return sum / static_cast<double>(edges_.size());
}

HexMesh build_topology(std::vector<Vec3> vertices, std::vector<CellCorners> cells) {
    HexMesh m;
    const std::size_t nv = vertices.size();
    const std::size_t nc = cells.size();

    for (std::size_t c = 0; c < nc; ++c) {
        auto sorted = cells[c];
        for (Index v : sorted)
            if (v >= nv)
                throw TopologyError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                                    " out of range (" + std::to_string(nv) + " vertices)");
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw TopologyError("degenerate cell " + std::to_string(c) + ": repeated vertex index");
    }
    {
        std::vector<std::pair<CellCorners, Index>> keys(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            keys[c] = {cells[c], static_cast<Index>(c)};
            std::sort(keys[c].first.begin(), keys[c].first.end());
        }
        std::sort(keys.begin(), keys.end());
        for (std::size_t i = 1; i < nc; ++i)
            if (keys[i].first == keys[i - 1].first)
                throw TopologyError("duplicate cells " + std::to_string(keys[i - 1].second) + " and " +
                                    std::to_string(keys[i].second));
    }

    // Edges: collect (key, cell, local) and dedup by sorted key.
    struct EdgeRef {
        std::uint64_t key;
        Index cell;
        int local;
    };
    std::vector<EdgeRef> erefs;
    erefs.reserve(nc * 12);
    for (std::size_t c = 0; c < nc; ++c)
        for (int l = 0; l < 12; ++l) {
            Index a = cells[c][hex::kEdges[l][0]], b = cells[c][hex::kEdges[l][1]];
            if (a > b) std::swap(a, b);
            erefs.push_back({(std::uint64_t(a) << 32) | b, static_cast<Index>(c), l});
        }
    std::sort(erefs.begin(), erefs.end(), [](const EdgeRef& x, const EdgeRef& y) {
        return x.key != y.key ? x.key < y.key : (x.cell != y.cell ? x.cell < y.cell : x.local < y.local);
    });
    m.cell_edges_.resize(nc);
    std::vector<std::pair<Index, Index>> edge_cell_pairs;
    edge_cell_pairs.reserve(erefs.size());
    for (std::size_t i = 0; i < erefs.size(); ++i) {
        if (i == 0 || erefs[i].key != erefs[i - 1].key)
            m.edges_.push_back({Index(erefs[i].key >> 32), Index(erefs[i].key & 0xffffffffu)});
        Index e = static_cast<Index>(m.edges_.size() - 1);
        m.cell_edges_[erefs[i].cell][erefs[i].local] = e;
        edge_cell_pairs.push_back({e, erefs[i].cell});
    }
    m.edge_cells_ = build_csr(m.edges_.size(), edge_cell_pairs);

    // Faces: dedup by sorted quadruple, keep the corner order of the first cell.
    struct FaceRef {
        std::array<Index, 4> key;
        Index cell;
        int local;
    };
    std::vector<FaceRef> frefs;
    frefs.reserve(nc * 6);
    for (std::size_t c = 0; c < nc; ++c)
        for (int l = 0; l < 6; ++l) {
            std::array<Index, 4> key;
            for (int k = 0; k < 4; ++k) key[k] = cells[c][hex::kFaces[l][k]];
            std::sort(key.begin(), key.end());
            frefs.push_back({key, static_cast<Index>(c), l});
        }
    std::sort(frefs.begin(), frefs.end(), [](const FaceRef& x, const FaceRef& y) {
        return x.key != y.key ? x.key < y.key : (x.cell != y.cell ? x.cell < y.cell : x.local < y.local);
    });
    m.cell_faces_.resize(nc);
    std::vector<std::pair<Index, Index>> face_cell_pairs;
    face_cell_pairs.reserve(frefs.size());
    for (std::size_t i = 0; i < frefs.size(); ++i) {
        if (i == 0 || frefs[i].key != frefs[i - 1].key) {
            std::array<Index, 4> corners;
            for (int k = 0; k < 4; ++k) corners[k] = cells[frefs[i].cell][hex::kFaces[frefs[i].local][k]];
            m.faces_.push_back(corners);
        }
        Index f = static_cast<Index>(m.faces_.size() - 1);
        m.cell_faces_[frefs[i].cell][frefs[i].local] = f;
        face_cell_pairs.push_back({f, frefs[i].cell});
    }
    m.face_cells_ = build_csr(m.faces_.size(), face_cell_pairs);
    for (std::size_t f = 0; f < m.faces_.size(); ++f)
        if (m.face_cells_.count(f) > 2)
            throw TopologyError("non-manifold face " + std::to_string(f) + " shared by " +
                                std::to_string(m.face_cells_.count(f)) + " cells");

    // Face -> edges via the edge key lookup of the owning cell.
    m.face_edges_.resize(m.faces_.size());
    std::vector<std::pair<Index, Index>> edge_face_pairs;
    edge_face_pairs.reserve(m.faces_.size() * 4);
    for (std::size_t f = 0; f < m.faces_.size(); ++f) {
        Index owner = m.face_cells_[f][0];
        const auto& ce = m.cell_edges_[owner];
        for (int k = 0; k < 4; ++k) {
            Index a = m.faces_[f][k], b = m.faces_[f][(k + 1) % 4];
            if (a > b) std::swap(a, b);
            Index found = ~Index(0);
            for (Index e : ce)
                if (m.edges_[e][0] == a && m.edges_[e][1] == b) found = e;
            m.face_edges_[f][k] = found;
            edge_face_pairs.push_back({found, static_cast<Index>(f)});
        }
    }
    m.edge_faces_ = build_csr(m.edges_.size(), edge_face_pairs);

    std::vector<std::pair<Index, Index>> vertex_cell_pairs;
    vertex_cell_pairs.reserve(nc * 8);
    for (std::size_t c = 0; c < nc; ++c)
        for (Index v : cells[c]) vertex_cell_pairs.push_back({v, static_cast<Index>(c)});
    m.vertex_cells_ = build_csr(nv, vertex_cell_pairs);

    m.edge_boundary_.assign(m.edges_.size(), 0);
    m.vertex_boundary_.assign(nv, 0);
    for (std::size_t f = 0; f < m.faces_.size(); ++f) {
        if (m.face_cells_.count(f) != 1) continue;
        for (Index e : m.face_edges_[f]) m.edge_boundary_[e] = 1;
        for (Index v : m.faces_[f]) m.vertex_boundary_[v] = 1;
    }

    m.vertices_ = std::move(vertices);
    m.cells_ = std::move(cells);
    m.non_conforming_ = count_hanging_vertices(m) > 0;
    return m;
}

EdgeValence classify_edge(const HexMesh& mesh, Index e) {
    EdgeValence ev;
    ev.edge = e;
    ev.valence = mesh.edge_valence(e);
    ev.boundary = mesh.is_boundary_edge(e);
    bool regular = ev.boundary ? ev.valence == 2 : ev.valence == 4;
    if (regular)
        ev.kind = EdgeValenceClass::Regular;
    else if (ev.valence == 1)
        ev.kind = EdgeValenceClass::Valence1;
    else
        ev.kind = EdgeValenceClass::Singular;
    return ev;
}

std::vector<EdgeValence> singular_edges(const HexMesh& mesh) {
    std::vector<EdgeValence> out;
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        auto ev = classify_edge(mesh, e);
        if (ev.kind != EdgeValenceClass::Regular) out.push_back(ev);
    }
    return out;
}

std::array<Index, 3> topologically_parallel_edges(const HexMesh& mesh, Index c, Index e) {
    int local = mesh.local_edge(c, e);
    if (local < 0)
        throw std::invalid_argument("edge " + std::to_string(e) + " is not an edge of cell " + std::to_string(c));
    int base = hex::edge_class(local) * 4;
    std::array<Index, 3> out{};
    int k = 0;
    for (int i = base; i < base + 4; ++i)
        if (i != local) out[k++] = mesh.cell_edges(c)[i];
    return out;
}

std::size_t count_hanging_vertices(const HexMesh& mesh, double rel_tolerance) {
    std::vector<Index> bverts;
    std::vector<Index> bedges;
    for (Index v = 0; v < mesh.num_vertices(); ++v)
        if (mesh.is_boundary_vertex(v)) bverts.push_back(v);
    for (Index e = 0; e < mesh.num_edges(); ++e)
        if (mesh.is_boundary_edge(e)) bedges.push_back(e);
    if (bverts.empty() || bedges.empty()) return 0;

    double cell = std::max(mesh.mean_edge_length(), 1e-12);
    auto key_of = [cell](const Vec3& p) {
        auto q = [cell](double x) { return static_cast<std::int64_t>(std::floor(x / cell)); };
        return std::array<std::int64_t, 3>{q(p.x), q(p.y), q(p.z)};
    };
    struct KeyHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
            return std::hash<std::int64_t>()(k[0] * 73856093 ^ k[1] * 19349663 ^ k[2] * 83492791);
        }
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<Index>, KeyHash> grid;
    for (Index v : bverts) grid[key_of(mesh.vertex(v))].push_back(v);

    std::vector<std::uint8_t> hanging(mesh.num_vertices(), 0);
    for (Index e : bedges) {
        const Vec3& a = mesh.vertex(mesh.edge(e)[0]);
        const Vec3& b = mesh.vertex(mesh.edge(e)[1]);
        double len = length(b - a);
        double tol = rel_tolerance * std::max(len, 1e-300);
        auto lo = key_of(min(a, b)), hi = key_of(max(a, b));
        for (auto x = lo[0]; x <= hi[0]; ++x)
            for (auto y = lo[1]; y <= hi[1]; ++y)
                for (auto z = lo[2]; z <= hi[2]; ++z) {
                    auto it = grid.find({x, y, z});
                    if (it == grid.end()) continue;
                    for (Index v : it->second) {
                        if (v == mesh.edge(e)[0] || v == mesh.edge(e)[1]) continue;
                        double t = 0.0;
                        double d = point_segment_distance(mesh.vertex(v), a, b, &t);
                        if (d <= tol && t > 0.0 && t < 1.0) hanging[v] = 1;
                    }
                }
    }
    return static_cast<std::size_t>(std::count(hanging.begin(), hanging.end(), 1));
}

}  // namespace hexlens
