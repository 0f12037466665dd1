#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "hexlens/camera.hpp"
#include "hexlens/mesh.hpp"

namespace hexlens {

/// Screen positions are snapped to 1/256 pixel before any coverage test so
/// triangles sharing an edge evaluate bit-identical edge functions.
inline constexpr int kSubpixelBits = 8;
inline constexpr std::int64_t kSubpixel = std::int64_t{1} << kSubpixelBits;

/// Triangles are clipped against the near plane and a guard band of this many
/// half-viewports around the image centre, which bounds snapped coordinates.
inline constexpr double kGuardBand = 2.0;

struct ScreenVertex {
    std::int64_t x = 0, y = 0;  // fixed point, kSubpixelBits fractional bits
    double inv_z = 0.0;         // 1 / view z
    Vec3 world_over_z;          // object-space position / view z
    double importance_over_z = 0.0;
};

/// A clipped, projected triangle with positive orientation. `face` and
/// `half` (0 or 1, which triangle of the quad) identify its source.
struct ScreenTriangle {
    std::array<ScreenVertex, 3> v;
    Index face = 0;
    std::uint8_t half = 0;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive pixel bounds, clamped to the image
};

/// Input vertex of a triangle before clipping.
struct ClipVertex {
    Vec3 view;
    Vec3 world;
    double importance = 0.0;
};

/// Clips one object-space triangle and appends the resulting screen
/// triangles (none when fully clipped or degenerate after snapping).
void setup_triangle(const Projection& proj, const std::array<ClipVertex, 3>& tri, Index face, std::uint8_t half,
                    std::vector<ScreenTriangle>& out);

/// The two triangles of face `f`: corners (0,1,2) and (0,2,3).
void setup_face(const Projection& proj, const HexMesh& mesh, Index f, const std::vector<double>& vertex_importance,
                std::vector<ScreenTriangle>& out);

/// Perspective-correct interpolants of a covered pixel.
struct PixelSample {
    int x = 0, y = 0;
    double view_z = 0.0;
    Vec3 world;
    double importance = 0.0;
};

/// Fill convention: a pixel centre on an edge belongs to the triangle for
/// which the edge runs downwards (dy > 0) or, if horizontal, leftwards. Two
/// positively oriented triangles traverse a shared edge in opposite
/// directions, so exactly one of them owns it.
inline bool owns_edge(std::int64_t dx, std::int64_t dy) { return dy > 0 || (dy == 0 && dx < 0); }

/// Visits every pixel of `tri` inside [x0,x1] x [y0,y1] (inclusive), rows
/// top to bottom, pixels left to right.
template <typename Visit>
void rasterize_triangle(const ScreenTriangle& tri, int x0, int y0, int x1, int y1, Visit&& visit) {
    x0 = std::max(x0, tri.x0);
    y0 = std::max(y0, tri.y0);
    x1 = std::min(x1, tri.x1);
    y1 = std::min(y1, tri.y1);
    if (x0 > x1 || y0 > y1) return;

    const auto& v = tri.v;
    // edge i is opposite vertex i: from v[i+1] to v[i+2]
    std::int64_t dx[3], dy[3], row[3];
    bool owned[3];
    const std::int64_t px = x0 * kSubpixel + kSubpixel / 2;
    const std::int64_t py = y0 * kSubpixel + kSubpixel / 2;
    for (int i = 0; i < 3; ++i) {
        const auto& a = v[(i + 1) % 3];
        const auto& b = v[(i + 2) % 3];
        dx[i] = b.x - a.x;
        dy[i] = b.y - a.y;
        owned[i] = owns_edge(dx[i], dy[i]);
        row[i] = dx[i] * (py - a.y) - dy[i] * (px - a.x);
    }
    const double inv_area = 1.0 / static_cast<double>(row[0] + row[1] + row[2]);
    PixelSample s;
    for (int y = y0; y <= y1; ++y) {
        std::int64_t e[3] = {row[0], row[1], row[2]};
        for (int x = x0; x <= x1; ++x) {
            bool inside = true;
            for (int i = 0; i < 3; ++i) inside = inside && (e[i] > 0 || (e[i] == 0 && owned[i]));
            if (inside) {
                double b0 = e[0] * inv_area, b1 = e[1] * inv_area, b2 = e[2] * inv_area;
                double q = b0 * v[0].inv_z + b1 * v[1].inv_z + b2 * v[2].inv_z;
                double z = 1.0 / q;
                s.x = x;
                s.y = y;
                s.view_z = z;
                s.world = (v[0].world_over_z * b0 + v[1].world_over_z * b1 + v[2].world_over_z * b2) * z;
                s.importance =
                    (v[0].importance_over_z * b0 + v[1].importance_over_z * b1 + v[2].importance_over_z * b2) * z;
                visit(s);
            }
            for (int i = 0; i < 3; ++i) e[i] -= dy[i] * kSubpixel;
        }
        for (int i = 0; i < 3; ++i) row[i] += dx[i] * kSubpixel;
    }
}

}  // namespace hexlens
