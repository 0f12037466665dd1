#include "hexlens/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hexlens {

std::array<Vec3, 8> cell_positions(const HexMesh& mesh, Index c) {
    std::array<Vec3, 8> p;
    for (int k = 0; k < 8; ++k) p[k] = mesh.vertex(mesh.cell(c)[k]);
    return p;
}

double scaled_jacobian(const std::array<Vec3, 8>& p, bool* degenerate) {
    double longest = 0.0;
    for (const auto& e : hex::kEdges) longest = std::max(longest, length(p[e[1]] - p[e[0]]));
    const double eps = 1e-12 * longest;
    double jmin = std::numeric_limits<double>::infinity();
    for (int corner = 0; corner < 8; ++corner) {
        std::array<Vec3, 3> frame;
        for (int k = 0; k < 3; ++k) {
            Vec3 d = p[hex::kCornerFrames[corner][k]] - p[corner];
            double len = length(d);
            if (!(len > eps)) {
                if (degenerate) *degenerate = true;
                return 0.0;
            }
            frame[k] = d / len;
        }
        jmin = std::min(jmin, det3(frame[0], frame[1], frame[2]));
    }
    if (degenerate) *degenerate = false;
    // only floating-point overshoot can leave [-1, 1]
    return std::clamp(jmin, -1.0, 1.0);
}

ScaledJacobian scaled_jacobian(const HexMesh& mesh) {
    ScaledJacobian out;
    out.values.resize(mesh.num_cells());
    out.degenerate.assign(mesh.num_cells(), 0);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        bool deg = false;
        out.values[c] = scaled_jacobian(cell_positions(mesh, c), &deg);
        out.degenerate[c] = deg;
    }
    return out;
}

double tetrakis_volume(const std::array<Vec3, 8>& p) {
    Vec3 cc{};
    for (const auto& v : p) cc += v;
    cc *= 1.0 / 8.0;
    double six_v = 0.0;
    for (const auto& face : hex::kFaces) {
        Vec3 fc = (p[face[0]] + p[face[1]] + p[face[2]] + p[face[3]]) * 0.25;
        for (int k = 0; k < 4; ++k) {
            const Vec3& a = p[face[k]];
            const Vec3& b = p[face[(k + 1) % 4]];
            // outward triangle (a, b, fc) with the cell centroid as apex
            six_v += det3(a - cc, b - cc, fc - cc);
        }
    }
    return six_v / 6.0;
}

CellVolumes cell_volumes(const HexMesh& mesh) {
    CellVolumes out;
    out.values.resize(mesh.num_cells());
    out.inverted.assign(mesh.num_cells(), 0);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        out.values[c] = tetrakis_volume(cell_positions(mesh, c));
        out.inverted[c] = out.values[c] < 0.0;
    }
    return out;
}

Orientation mesh_orientation(const HexMesh& mesh) {
    std::size_t pos = 0, neg = 0;
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        double v = tetrakis_volume(cell_positions(mesh, c));
        if (v > 0.0) ++pos;
        else if (v < 0.0) ++neg;
    }
    if (pos == 0 && neg == 0) return Orientation::Degenerate;
    if (neg == 0) return Orientation::Positive;
    if (pos == 0) return Orientation::Negative;
    return Orientation::Mixed;
}

VertexValues vertex_importance(const HexMesh& mesh, std::span<const double> per_cell) {
    VertexValues out;
    out.values.assign(mesh.num_vertices(), 0.0);
    out.fallback.assign(mesh.num_vertices(), 0);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        auto cells = mesh.vertex_cells(v);
        if (cells.empty()) {
            out.fallback[v] = 1;
            continue;
        }
        double m = -std::numeric_limits<double>::infinity();
        for (Index c : cells) m = std::max(m, per_cell[c]);
        out.values[v] = m;
    }
    return out;
}

VertexValues weighted_vertex_attribute(const HexMesh& mesh, std::span<const double> per_cell,
                                       std::span<const double> volumes) {
    VertexValues out;
    out.values.assign(mesh.num_vertices(), 0.0);
    out.fallback.assign(mesh.num_vertices(), 0);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        auto cells = mesh.vertex_cells(v);
        if (cells.empty()) {
            out.fallback[v] = 1;
            continue;
        }
        double wsum = 0.0, sum = 0.0, plain = 0.0;
        for (Index c : cells) {
            wsum += volumes[c];
            sum += volumes[c] * per_cell[c];
            plain += per_cell[c];
        }
        if (wsum > 0.0) {
            out.values[v] = sum / wsum;
        } else {
            out.values[v] = plain / static_cast<double>(cells.size());
            out.fallback[v] = 1;
        }
    }
    return out;
}

VertexValues weighted_jacobian_attribute(const HexMesh& mesh, std::span<const double> jacobians,
                                         std::span<const double> volumes) {
    VertexValues out;
    out.values.assign(mesh.num_vertices(), 0.0);
    out.fallback.assign(mesh.num_vertices(), 0);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        double vsum = 0.0, inv = 0.0;
        bool any = false, skipped = false;
        for (Index c : mesh.vertex_cells(v)) {
            if (jacobians[c] == 0.0) {
                skipped = true;
                continue;
            }
            any = true;
            vsum += volumes[c];
            inv += volumes[c] / jacobians[c];
        }
        if (!any || inv == 0.0) {
            out.fallback[v] = 1;
            continue;
        }
        out.values[v] = vsum / inv;
        out.fallback[v] = skipped;
    }
    return out;
}

std::vector<double> edge_importance(const HexMesh& mesh, std::span<const double> per_cell) {
    std::vector<double> out(mesh.num_edges(), 0.0);
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index c : mesh.edge_cells(e)) m = std::max(m, per_cell[c]);
        out[e] = m;
    }
    return out;
}

namespace {
std::pair<double, double> min_max(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}
}  // namespace

std::vector<double> importance_from_jacobian(std::span<const double> jacobians) {
    auto [lo, hi] = min_max(jacobians);
    std::vector<double> out(jacobians.size(), 0.0);
    if (!(hi > lo)) return out;
    for (std::size_t i = 0; i < jacobians.size(); ++i) out[i] = (hi - jacobians[i]) / (hi - lo);
    return out;
}

std::vector<double> importance_from_scalar(std::span<const double> values) {
    auto [lo, hi] = min_max(values);
    std::vector<double> out(values.size(), 0.0);
    if (!(hi > lo)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
    return out;
}

AttributeField make_importance_field(const HexMesh& mesh, std::string name, std::vector<double> per_cell) {
    AttributeField f;
    f.name = std::move(name);
    f.per_vertex = vertex_importance(mesh, per_cell).values;
    f.per_edge = edge_importance(mesh, per_cell);
    std::tie(f.min, f.max) = min_max(per_cell);
    f.per_cell = std::move(per_cell);
    return f;
}

std::vector<double> vertex_to_cell(const HexMesh& mesh, std::span<const double> per_vertex) {
    std::vector<double> out(mesh.num_cells(), 0.0);
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        double s = 0.0;
        for (Index v : mesh.cell(c)) s += per_vertex[v];
        out[c] = s / 8.0;
    }
    return out;
}

FieldSummary summarize(std::span<const double> values, std::size_t bins) {
    FieldSummary s;
    s.histogram.assign(bins, 0);
    if (values.empty() || bins == 0) return s;
    std::tie(s.min, s.max) = min_max(values);
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        std::size_t b = 0;
        if (s.max > s.min) b = std::min(bins - 1, static_cast<std::size_t>((v - s.min) / (s.max - s.min) * bins));
        s.histogram[b]++;
    }
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

}  // namespace hexlens
