#include "hexlens/shading.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hexlens {

TransferFunction::TransferFunction()
    : points_{{0.0, {{0.0, 0.0, 1.0}, 0.0}}, {1.0, {{1.0, 0.0, 0.0}, 1.0}}} {}

TransferFunction::TransferFunction(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw TransferFunctionError("transfer function needs at least 2 control points");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (!in_unit(p.x))
            throw TransferFunctionError("control point " + std::to_string(i) + " position outside [0,1]");
        if (!in_unit(p.value.rgb.x) || !in_unit(p.value.rgb.y) || !in_unit(p.value.rgb.z) || !in_unit(p.value.a))
            throw TransferFunctionError("control point " + std::to_string(i) + " colour/opacity outside [0,1]");
        if (i > 0 && p.x < points_[i - 1].x)
            throw TransferFunctionError("control points are not sorted at index " + std::to_string(i));
    }
}

Rgba TransferFunction::operator()(double x) const {
    if (!(x > points_.front().x)) return points_.front().value;
    if (!(x < points_.back().x)) return points_.back().value;
    auto hi = std::upper_bound(points_.begin(), points_.end(), x, [](double v, const Point& p) { return v < p.x; });
    auto lo = hi - 1;
    double t = (x - lo->x) / (hi->x - lo->x);
    return {lerp(lo->value.rgb, hi->value.rgb, t), lo->value.a + (hi->value.a - lo->value.a) * t};
}

double TransferFunction::max_opacity(double lo, double hi) const {
    double m = std::max(opacity(lo), opacity(hi));
    for (const auto& p : points_)
        if (p.x > lo && p.x < hi) m = std::max(m, p.value.a);
    return m;
}

LensState LensState::screen(double cx, double cy, double radius) {
    LensState l;
    l.enabled = true;
    l.mode = LensMode::Screen;
    l.center_x = cx;
    l.center_y = cy;
    l.radius_px = radius;
    return l;
}

LensState LensState::object(const Vec3& point, double radius) {
    LensState l;
    l.enabled = true;
    l.mode = LensMode::Object;
    l.anchor = point;
    l.ray = {point, {0, 0, 1}};
    l.world_radius = radius;
    return l;
}

FocusSample focus_factor(double px, double py, const Vec3& world, const LensState& lens) {
    if (!lens.enabled) return {};
    double dist;
    if (lens.mode == LensMode::Screen)
        dist = std::hypot(px - lens.center_x, py - lens.center_y) / lens.radius_px;
    else
        dist = length(world - lens.lens_point()) / lens.world_radius;
    return {focus_from_dist(dist), dist};
}

EdgeDistance edge_distance(const Vec3& p, const FaceFragmentInputs& face, unsigned mask) {
    EdgeDistance best;
    for (int i = 0; i < 4; ++i) {
        if (!(mask & (1u << i))) continue;
        double t;
        double d = point_segment_distance(p, face.edges[i].a, face.edges[i].b, &t);
        if (d < best.d) best = {d, i, t};
    }
    return best;
}

const char* to_string(FragmentKind k) {
    switch (k) {
        case FragmentKind::FocusEdge: return "focus-edge";
        case FragmentKind::ContextEdge: return "context-edge";
        case FragmentKind::FocusFace: return "focus-face";
        case FragmentKind::ContextFace: return "context-face";
        case FragmentKind::Halo: return "halo";
        case FragmentKind::Silhouette: return "silhouette";
    }
    return "unknown";
}

namespace {
Rgb clamp01(const Rgb& c) {
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}
}  // namespace

ShadeResult shade_fragment(const Vec3& p, double importance, double depth, const FaceFragmentInputs& face,
                           FocusSample fs, const ShadingParams& params) {
    ShadeResult r;
    const double focus = fs.focus;
    r.w = (1.0 + 0.3 * focus) * params.w_base;

    unsigned lod_mask = 0, important_mask = 0;
    for (int i = 0; i < 4; ++i) {
        if (face.edges[i].level >= params.lod) lod_mask |= 1u << i;
        if (face.edges[i].attr >= params.delta) important_mask |= 1u << i;
    }
    const unsigned focus_mask = focus > 0.0 ? (lod_mask | important_mask) : lod_mask;

    std::array<EdgeDistance, 4> all;
    for (int i = 0; i < 4; ++i) {
        all[i].edge = i;
        all[i].d = point_segment_distance(p, face.edges[i].a, face.edges[i].b, &all[i].t);
    }
    auto nearest = [&](unsigned mask) {
        EdgeDistance best;
        for (int i = 0; i < 4; ++i)
            if ((mask & (1u << i)) && all[i].d < best.d) best = all[i];
        return best;
    };
    r.nearest = nearest(focus_mask);
    double d_context = focus_mask == lod_mask ? r.nearest.d : nearest(lod_mask).d;
    r.e_focus = r.nearest.d <= r.w;
    r.e_context = d_context <= r.w;
    r.alpha_e = (r.e_context ? 1.0 : 0.0) + ((r.e_focus ? 1.0 : 0.0) - (r.e_context ? 1.0 : 0.0)) * focus;

    double d_any = nearest(0xF).d;
    r.s_e = d_any <= (2.0 / 3.0) * params.w_base ? params.accent : 1.0;

    double dist = std::clamp(fs.dist, 0.0, 1.0);
    double dist2 = dist * dist;
    Rgba face_tf = params.tf(importance);
    r.alpha_f = params.face_alpha * face_tf.a * (dist2 * dist2);

    Rgb c_e{};
    if (r.alpha_e > 0.0) {
        const auto& e = face.edges[r.nearest.edge];
        double imp = e.importance_a + (e.importance_b - e.importance_a) * r.nearest.t;
        c_e = clamp01(params.tf.color(imp) * (1.2 + (0.8 - 1.2) * focus));
        double k = 1.0 - params.desaturation * focus * std::clamp(depth, 0.0, 1.0);
        double lum = 0.2126 * c_e.x + 0.7152 * c_e.y + 0.0722 * c_e.z;
        c_e = Rgb{lum, lum, lum} + (c_e - Rgb{lum, lum, lum}) * k;
    }

    double face_term = (1.0 - r.alpha_e) * r.s_e * r.alpha_f;
    r.color = c_e * r.alpha_e + face_tf.rgb * face_term;
    r.alpha_raw = r.alpha_e + face_term;
    r.alpha = std::clamp(r.alpha_raw, 0.0, 1.0);

    bool in_focus = focus >= 0.5;
    if (r.alpha_e > 0.0)
        r.kind = in_focus ? FragmentKind::FocusEdge : FragmentKind::ContextEdge;
    else
        r.kind = in_focus ? FragmentKind::FocusFace : FragmentKind::ContextFace;
    return r;
}

HaloResult emit_halo(const ShadeResult& shaded, double depth, FocusSample fs, const ShadingParams& params) {
    HaloResult h;
    if (!(fs.focus > 0.0) || shaded.nearest.edge < 0) return h;
    double d = shaded.nearest.d;
    if (d > shaded.w && d <= shaded.w * (1.0 + params.halo_width * fs.focus)) {
        h.emitted = true;
        h.alpha = fs.focus;
        h.depth = depth + params.halo_offset;
    }
    return h;
}

}  // namespace hexlens
