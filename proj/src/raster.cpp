#include "hexlens/raster.hpp"

#include <cmath>
#include <tuple>

namespace hexlens {

namespace {

using Polygon = std::vector<ClipVertex>;

/// Intersection of segment [a,b] with the plane where dist() is 0. The
/// endpoints are ordered canonically first so a shared edge clips to the
/// same point regardless of which triangle traverses it.
template <typename Dist>
ClipVertex intersect(const ClipVertex& a, const ClipVertex& b, Dist&& dist) {
    const auto key = [](const ClipVertex& v) { return std::tie(v.view.x, v.view.y, v.view.z); };
    const ClipVertex& p = key(a) < key(b) ? a : b;
    const ClipVertex& q = key(a) < key(b) ? b : a;
    double dp = dist(p), dq = dist(q);
    double t = dp / (dp - dq);
    return {lerp(p.view, q.view, t), lerp(p.world, q.world, t), p.importance + (q.importance - p.importance) * t};
}

template <typename Dist>
void clip(Polygon& poly, Polygon& scratch, Dist&& dist) {
    bool all_inside = true;
    for (const auto& v : poly) all_inside = all_inside && dist(v) >= 0.0;
    if (all_inside) return;
    scratch.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const ClipVertex& a = poly[i];
        const ClipVertex& b = poly[(i + 1) % poly.size()];
        bool ina = dist(a) >= 0.0, inb = dist(b) >= 0.0;
        if (ina) scratch.push_back(a);
        if (ina != inb) scratch.push_back(intersect(a, b, dist));
    }
    poly.swap(scratch);
}

ScreenVertex project(const Projection& proj, const ClipVertex& c) {
    ScreenVertex s;
    s.x = std::llround(proj.screen_x(c.view) * kSubpixel);
    s.y = std::llround(proj.screen_y(c.view) * kSubpixel);
    s.inv_z = 1.0 / c.view.z;
    s.world_over_z = c.world * s.inv_z;
    s.importance_over_z = c.importance * s.inv_z;
    return s;
}

std::int64_t signed_area(const ScreenVertex& a, const ScreenVertex& b, const ScreenVertex& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Inclusive range of pixel indices whose centres (i + 0.5) can lie in [lo, hi].
std::pair<int, int> pixel_span(std::int64_t lo, std::int64_t hi, int limit) {
    auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    std::int64_t first = floor_div(lo - kSubpixel / 2 + kSubpixel - 1, kSubpixel);
    std::int64_t last = floor_div(hi - kSubpixel / 2, kSubpixel);
    first = std::max<std::int64_t>(first, 0);
    last = std::min<std::int64_t>(last, limit - 1);
    return {static_cast<int>(first), static_cast<int>(last)};
}

}  // namespace

void setup_triangle(const Projection& proj, const std::array<ClipVertex, 3>& tri, Index face, std::uint8_t half,
                    std::vector<ScreenTriangle>& out) {
    const double near = proj.near_z();
    const double gx = kGuardBand * 0.5 * proj.width() / proj.focal();
    const double gy = kGuardBand * 0.5 * proj.height() / proj.focal();

    thread_local Polygon poly, scratch;
    poly.assign(tri.begin(), tri.end());
    clip(poly, scratch, [&](const ClipVertex& v) { return v.view.z - near; });
    clip(poly, scratch, [&](const ClipVertex& v) { return gx * v.view.z - v.view.x; });
    clip(poly, scratch, [&](const ClipVertex& v) { return gx * v.view.z + v.view.x; });
    clip(poly, scratch, [&](const ClipVertex& v) { return gy * v.view.z - v.view.y; });
    clip(poly, scratch, [&](const ClipVertex& v) { return gy * v.view.z + v.view.y; });
    if (poly.size() < 3) return;

    std::array<ScreenVertex, 16> projected;
    std::size_t n = std::min(poly.size(), projected.size());
    for (std::size_t i = 0; i < n; ++i) projected[i] = project(proj, poly[i]);

    for (std::size_t i = 1; i + 1 < n; ++i) {
        ScreenTriangle t;
        t.v = {projected[0], projected[i], projected[i + 1]};
        std::int64_t area = signed_area(t.v[0], t.v[1], t.v[2]);
        if (area == 0) continue;
        // positive orientation in the edge-function convention of rasterize_triangle
        if (area < 0) std::swap(t.v[1], t.v[2]);
        t.face = face;
        t.half = half;
        std::int64_t lx = t.v[0].x, hx = lx, ly = t.v[0].y, hy = ly;
        for (const auto& v : t.v) {
            lx = std::min(lx, v.x);
            hx = std::max(hx, v.x);
            ly = std::min(ly, v.y);
            hy = std::max(hy, v.y);
        }
        std::tie(t.x0, t.x1) = pixel_span(lx, hx, proj.width());
        std::tie(t.y0, t.y1) = pixel_span(ly, hy, proj.height());
        if (t.x0 > t.x1 || t.y0 > t.y1) continue;
        out.push_back(t);
    }
}

void setup_face(const Projection& proj, const HexMesh& mesh, Index f, const std::vector<double>& vertex_importance,
                std::vector<ScreenTriangle>& out) {
    const auto& q = mesh.face(f);
    std::array<ClipVertex, 4> c;
    for (int k = 0; k < 4; ++k) {
        const Vec3& w = mesh.vertex(q[k]);
        c[k] = {proj.to_view(w), w, vertex_importance.empty() ? 0.0 : vertex_importance[q[k]]};
    }
    setup_triangle(proj, {c[0], c[1], c[2]}, f, 0, out);
    setup_triangle(proj, {c[0], c[2], c[3]}, f, 1, out);
}

}  // namespace hexlens
