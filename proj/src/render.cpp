#include "hexlens/render.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "hexlens/raster.hpp"

namespace hexlens {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

Scene Scene::assemble(HexMesh mesh, AttributeField importance, LodEdgeStructure lod, std::size_t sheet_count) {
    Scene s;
    s.bounds = mesh.bounds();
    s.mean_edge_length = mesh.mean_edge_length();
    s.face_boundary.resize(mesh.num_faces());
    for (Index f = 0; f < mesh.num_faces(); ++f) s.face_boundary[f] = mesh.is_boundary_face(f);
    s.mesh = std::move(mesh);
    s.importance = std::move(importance);
    s.lod = std::move(lod);
    s.sheet_count = sheet_count;
    return s;
}

Scene Scene::build(HexMesh mesh, AttributeField importance) {
    auto sheets = extract_sheets(mesh);
    auto lod = build_lod(mesh, sheets);
    return assemble(std::move(mesh), std::move(importance), std::move(lod), sheets.size());
}

AttributeField jacobian_importance(const HexMesh& mesh) {
    auto sj = scaled_jacobian(mesh);
    return make_importance_field(mesh, "scaled-jacobian", importance_from_jacobian(sj.values));
}

AttributeField importance_for_metric(const MeshFile& file, const std::string& metric) {
    if (metric == "scaled-jacobian") return jacobian_importance(file.mesh);
    const std::string prefix = "field:";
    if (metric.rfind(prefix, 0) != 0)
        throw std::invalid_argument("unknown metric '" + metric + "' (expected scaled-jacobian or field:<name>)");
    std::string name = metric.substr(prefix.size());
    const ScalarField* field = file.find_field(name);
    if (!field) throw std::invalid_argument("mesh has no field named '" + name + "'");
    std::vector<double> per_cell =
        field->location == FieldLocation::Cell ? field->values : vertex_to_cell(file.mesh, field->values);
    return make_importance_field(file.mesh, name, importance_from_scalar(per_cell));
}

std::size_t mesh_buffer_bytes(const HexMesh& mesh) {
    return mesh.num_vertices() * (3 * 4 + 4) + mesh.num_cells() * 8 * 4 + mesh.num_faces() * 4 * 4 +
           mesh.num_edges() * (2 * 4 + 4 + 4);
}

const char* to_string(Background b) { return b == Background::White ? "white" : "black"; }

Rgb background_color(Background b) { return b == Background::White ? Rgb{1, 1, 1} : Rgb{0, 0, 0}; }

void validate(const RenderParams& p) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid render parameter: " + what); };
    auto finite = [](double v) { return std::isfinite(v); };
    if (p.width < 1 || p.height < 1 || p.width > 16384 || p.height > 16384) fail("size must be within 1..16384");
    if (!finite(p.w_base)) fail("w_base");
    if (!finite(p.delta)) fail("delta");
    if (!finite(p.accent) || p.accent < 1.0) fail("accent must be >= 1");
    if (!(p.face_alpha >= 0.0 && p.face_alpha <= 1.0)) fail("face_alpha must be in [0,1]");
    if (!(p.halo_width >= 0.0) || !finite(p.halo_width)) fail("halo_width must be >= 0");
    if (!(p.halo_offset >= 0.0) || !finite(p.halo_offset)) fail("halo_offset must be >= 0");
    if (!(p.desaturation >= 0.0 && p.desaturation <= 1.0)) fail("desaturation must be in [0,1]");
    if (!(p.silhouette_threshold > 0.0) || !finite(p.silhouette_threshold)) fail("silhouette_threshold must be > 0");
    if (p.threads < 0) fail("threads must be >= 0");
    if (p.tile_size < 8 || p.tile_size > 1024) fail("tile_size must be within 8..1024");
    if (p.camera) {
        const Camera& c = *p.camera;
        if (!(c.fov_y_deg > 0.0 && c.fov_y_deg < 180.0)) fail("camera fov must be in (0,180)");
        if (length(c.target - c.eye) == 0.0) fail("camera eye equals target");
        if (length(c.up) == 0.0) fail("camera up is zero");
    }
}

Camera resolve_camera(const Scene& scene, const RenderParams& p) {
    return p.camera ? *p.camera : fit_camera(scene.bounds, p.width, p.height);
}

int resolve_lod(const Scene& scene, const RenderParams& p) {
    return p.lod >= 0 ? p.lod : std::max(0, scene.lod.level_count - 2);
}

ShadingParams resolve_shading(const Scene& scene, const RenderParams& p) {
    ShadingParams s;
    s.w_base = p.w_base > 0.0 ? p.w_base : 0.15 * scene.mean_edge_length;
    s.delta = p.delta;
    s.lod = resolve_lod(scene, p);
    s.accent = p.accent;
    s.face_alpha = p.face_alpha;
    s.halo_width = p.halo_width;
    s.halo_offset = p.halo_offset;
    s.desaturation = p.desaturation;
    s.tf = p.tf;
    return s;
}

int resolve_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HEXLENS_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(n, 1);
}

FaceFragmentInputs face_inputs(const Scene& scene, Index f) {
    const auto& mesh = scene.mesh;
    const auto& q = mesh.face(f);
    const auto& fe = mesh.face_edges(f);
    const auto& imp = scene.importance.per_vertex;
    FaceFragmentInputs in;
    for (int k = 0; k < 4; ++k) in.corners[k] = mesh.vertex(q[k]);
    for (int k = 0; k < 4; ++k) {
        Index a = q[k], b = q[(k + 1) % 4];
        Index e = fe[k];
        EdgeInput& ed = in.edges[k];
        ed.a = mesh.vertex(a);
        ed.b = mesh.vertex(b);
        ed.importance_a = imp.empty() ? 0.0 : imp[a];
        ed.importance_b = imp.empty() ? 0.0 : imp[b];
        ed.attr = scene.importance.per_edge.empty() ? 0.0 : scene.importance.per_edge[e];
        ed.level = scene.lod.edge_level.empty() ? 0 : scene.lod.edge_level[e];
    }
    return in;
}

namespace {

/// Per-frame state shared read-only by all tiles.
struct Frame {
    const Scene& scene;
    Projection proj;
    ShadingParams shading;
    LensState lens;
    Rgb background;
    std::vector<ScreenTriangle> triangles;  // submission order: face index, then half
    std::vector<FaceFragmentInputs> faces;
    std::vector<std::uint8_t> shaded;      // face can produce visible fragments
    bool want_colour = true;
    bool want_depth = false;
    int tile = 64;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> bins;

    Frame(const Scene& s, const RenderParams& p, const LensState& l)
        : scene(s),
          proj(resolve_camera(s, p), p.width, p.height, s.bounds),
          shading(resolve_shading(s, p)),
          lens(l),
          background(background_color(p.background)),
          tile(p.tile_size) {}
};

/// False when no fragment of the face can have non-zero opacity.
bool face_can_emit(const FaceFragmentInputs& in, double lo_imp, double hi_imp, const ShadingParams& sp,
                   const LensState& lens) {
    if (sp.face_alpha > 0.0 && sp.tf.max_opacity(lo_imp, hi_imp) > 0.0) return true;
    for (const auto& e : in.edges) {
        if (e.level >= sp.lod) return true;
        if (lens.enabled && e.attr >= sp.delta) return true;
    }
    return false;
}

void prepare(Frame& fr, bool colour, bool depth) {
    validate(fr.lens);
    fr.want_colour = colour;
    fr.want_depth = depth;
    const HexMesh& mesh = fr.scene.mesh;
    const auto& imp = fr.scene.importance.per_vertex;
    fr.faces.resize(mesh.num_faces());
    fr.shaded.assign(mesh.num_faces(), 0);
    fr.triangles.clear();
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        bool boundary = fr.scene.face_boundary[f];
        bool emit = false;
        if (colour) {
            fr.faces[f] = face_inputs(fr.scene, f);
            double lo = 0.0, hi = 0.0;
            if (!imp.empty()) {
                const auto& q = mesh.face(f);
                lo = hi = imp[q[0]];
                for (int k = 1; k < 4; ++k) {
                    lo = std::min(lo, imp[q[k]]);
                    hi = std::max(hi, imp[q[k]]);
                }
            }
            emit = face_can_emit(fr.faces[f], lo, hi, fr.shading, fr.lens);
        }
        fr.shaded[f] = emit;
        if (emit || (depth && boundary)) setup_face(fr.proj, mesh, f, imp, fr.triangles);
    }
    fr.tiles_x = (fr.proj.width() + fr.tile - 1) / fr.tile;
    fr.tiles_y = (fr.proj.height() + fr.tile - 1) / fr.tile;
    fr.bins.assign(static_cast<std::size_t>(fr.tiles_x) * fr.tiles_y, {});
    for (std::uint32_t i = 0; i < fr.triangles.size(); ++i) {
        const auto& t = fr.triangles[i];
        for (int ty = t.y0 / fr.tile; ty <= t.y1 / fr.tile; ++ty)
            for (int tx = t.x0 / fr.tile; tx <= t.x1 / fr.tile; ++tx) fr.bins[ty * fr.tiles_x + tx].push_back(i);
    }
}

/// Rasterizes and shades the triangles in `bin` clipped to a pixel region.
void shade_region(const Frame& fr, const std::vector<std::uint32_t>& bin, int x0, int y0, int x1, int y1,
                  FragmentBuffer* buffer, std::vector<float>* depth) {
    const int width = fr.proj.width();
    for (std::uint32_t ti : bin) {
        const ScreenTriangle& tri = fr.triangles[ti];
        const bool colour = buffer && fr.shaded[tri.face];
        const bool write_depth = depth && fr.scene.face_boundary[tri.face];
        if (!colour && !write_depth) continue;
        const FaceFragmentInputs& in = fr.faces[tri.face];
        rasterize_triangle(tri, x0, y0, x1, y1, [&](const PixelSample& s) {
            double d = std::clamp(fr.proj.depth(s.view_z), 0.0, 1.0);
            if (write_depth) {
                float& slot = (*depth)[static_cast<std::size_t>(s.y) * width + s.x];
                slot = std::min(slot, static_cast<float>(d));
            }
            if (!colour) return;
            FocusSample fs = focus_factor(s.x + 0.5, s.y + 0.5, s.world, fr.lens);
            ShadeResult r = shade_fragment(s.world, s.importance, d, in, fs, fr.shading);
            if (r.alpha > 0.0)
                buffer->push(s.x, s.y, static_cast<float>(d), r.color / r.alpha_raw, static_cast<float>(r.alpha),
                             r.kind);
            HaloResult h = emit_halo(r, d, fs, fr.shading);
            if (h.emitted && h.alpha > 0.0)
                buffer->push(s.x, s.y, static_cast<float>(h.depth), Rgb{1, 1, 1}, static_cast<float>(h.alpha),
                             FragmentKind::Halo);
        });
    }
}

struct WorkerStats {
    std::size_t fragments = 0, max_buffer = 0;
    double shade_ms = 0.0, composite_ms = 0.0;
};

}  // namespace

RenderResult render(const Scene& scene, const RenderParams& params, const LensState& lens) {
    validate(params);
    const auto t_start = Clock::now();
    RenderResult out;
    Frame fr(scene, params, lens);
    prepare(fr, true, params.silhouettes);
    out.stats.setup_ms = ms_since(t_start);
    out.stats.triangles = fr.triangles.size();
    out.stats.lod = fr.shading.lod;

    out.image = Image(params.width, params.height);
    std::vector<float> depth;
    if (params.silhouettes) depth.assign(static_cast<std::size_t>(params.width) * params.height, kNoDepth);

    const int tiles = fr.tiles_x * fr.tiles_y;
    const int threads = std::min(resolve_threads(params.threads), std::max(tiles, 1));
    std::atomic<int> next{0};
    std::vector<WorkerStats> stats(threads);
    std::vector<std::size_t> tile_required(tiles, 0);

    auto work = [&](int w) {
        FragmentBuffer buffer;
        for (int t = next++; t < tiles; t = next++) {
            int tx = t % fr.tiles_x, ty = t / fr.tiles_x;
            int x0 = tx * fr.tile, y0 = ty * fr.tile;
            int x1 = std::min(x0 + fr.tile, params.width) - 1, y1 = std::min(y0 + fr.tile, params.height) - 1;
            auto t0 = Clock::now();
            buffer = FragmentBuffer(x0, y0, x1 - x0 + 1, y1 - y0 + 1, params.fragment_capacity);
            shade_region(fr, fr.bins[t], x0, y0, x1, y1, &buffer, params.silhouettes ? &depth : nullptr);
            buffer.finalize();
            auto t1 = Clock::now();
            stats[w].shade_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
            stats[w].fragments += buffer.size();
            stats[w].max_buffer = std::max(stats[w].max_buffer, buffer.size());
            if (buffer.over_capacity()) {
                tile_required[t] = buffer.size();
                continue;
            }
            sort_and_composite(buffer, fr.background, out.image);
            stats[w].composite_ms += ms_since(t1);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    for (const auto& s : stats) {
        out.stats.fragments += s.fragments;
        out.stats.max_buffer_fragments = std::max(out.stats.max_buffer_fragments, s.max_buffer);
        out.stats.shade_ms += s.shade_ms;
        out.stats.composite_ms += s.composite_ms;
    }
    out.stats.tiles = static_cast<std::size_t>(tiles);
    out.stats.threads = threads;
    std::size_t required = 0;
    for (std::size_t r : tile_required) required = std::max(required, r);
    if (required > 0) throw CapacityError(required, params.fragment_capacity);

    if (params.silhouettes) {
        auto t0 = Clock::now();
        auto mask = silhouette_mask(depth, params.width, params.height, params.silhouette_threshold);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i])
                for (int c = 0; c < 4; ++c) out.image.rgba[i * 4 + c] = 1.0f;
        out.stats.silhouette_ms = ms_since(t0);
    }
    out.stats.total_ms = ms_since(t_start);
    return out;
}

FragmentBuffer rasterize(const Scene& scene, const RenderParams& params, const LensState& lens) {
    validate(params);
    Frame fr(scene, params, lens);
    fr.tile = std::max(params.width, params.height);
    prepare(fr, true, false);
    FragmentBuffer buffer(0, 0, params.width, params.height, params.fragment_capacity);
    std::vector<std::uint32_t> all(fr.triangles.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    shade_region(fr, all, 0, 0, params.width - 1, params.height - 1, &buffer, nullptr);
    buffer.finalize();
    return buffer;
}

std::vector<float> boundary_depth(const Scene& scene, const RenderParams& params) {
    validate(params);
    Frame fr(scene, params, {});
    fr.tile = std::max(params.width, params.height);
    prepare(fr, false, true);
    std::vector<float> depth(static_cast<std::size_t>(params.width) * params.height, kNoDepth);
    std::vector<std::uint32_t> all(fr.triangles.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    shade_region(fr, all, 0, 0, params.width - 1, params.height - 1, nullptr, &depth);
    return depth;
}

std::vector<std::uint8_t> silhouette_mask(const std::vector<float>& depth, int width, int height, double threshold) {
    std::vector<std::uint8_t> mask(depth.size(), 0);
    // A step counts only if it lies more than `threshold` outside the range
    // of the neighbouring steps. Smooth slopes and creases between planes
    // stay inside that range; depth discontinuities do not.
    auto scan = [&](std::size_t start, std::size_t stride, int count) {
        auto d = [&](int k) { return static_cast<double>(depth[start + stride * k]); };
        for (int k = 0; k + 1 < count; ++k) {
            double step = d(k + 1) - d(k);
            if (!(std::abs(step) > threshold)) continue;
            bool has_prev = k > 0, has_next = k + 2 < count;
            double prev = has_prev ? d(k) - d(k - 1) : 0.0, next = has_next ? d(k + 2) - d(k + 1) : 0.0;
            if (!has_prev) prev = has_next ? next : 0.0;
            if (!has_next) next = prev;
            double lo = std::min(prev, next), hi = std::max(prev, next);
            if (step > hi + threshold || step < lo - threshold) mask[start + stride * k] = mask[start + stride * (k + 1)] = 1;
        }
    };
    for (int y = 0; y < height; ++y) scan(static_cast<std::size_t>(y) * width, 1, width);
    for (int x = 0; x < width; ++x) scan(static_cast<std::size_t>(x), static_cast<std::size_t>(width), height);
    return mask;
}

void silhouette_pass(const Scene& scene, const RenderParams& params, Image& image) {
    auto depth = boundary_depth(scene, params);
    auto mask = silhouette_mask(depth, params.width, params.height, params.silhouette_threshold);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i])
            for (int c = 0; c < 4; ++c) image.rgba[i * 4 + c] = 1.0f;
}

namespace {
/// Moller-Trumbore; returns the ray parameter of a hit with t > eps.
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
    const double eps = 1e-12;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 p = cross(ray.dir, e2);
    double det = dot(e1, p);
    if (std::abs(det) < eps) return std::nullopt;
    double inv = 1.0 / det;
    Vec3 s = ray.origin - a;
    double u = dot(s, p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    Vec3 q = cross(s, e1);
    double v = dot(ray.dir, q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    double t = dot(e2, q) * inv;
    if (t <= eps) return std::nullopt;
    return t;
}
}  // namespace

std::optional<double> intersect_boundary(const HexMesh& mesh, const Ray& ray) {
    std::optional<double> best;
    for (Index f = 0; f < mesh.num_faces(); ++f) {
        if (!mesh.is_boundary_face(f)) continue;
        const auto& q = mesh.face(f);
        const Vec3 &a = mesh.vertex(q[0]), &b = mesh.vertex(q[1]), &c = mesh.vertex(q[2]), &d = mesh.vertex(q[3]);
        for (auto t : {intersect_triangle(ray, a, b, c), intersect_triangle(ray, a, c, d)})
            if (t && (!best || *t < *best)) best = t;
    }
    return best;
}

bool pick_object_lens(double px, double py, const Scene& scene, const RenderParams& params, double world_radius,
                      LensState& lens) {
    Projection proj(resolve_camera(scene, params), params.width, params.height, scene.bounds);
    Ray ray = proj.ray_through(px, py);
    auto t = intersect_boundary(scene.mesh, ray);
    if (!t) return false;
    lens.enabled = true;
    lens.mode = LensMode::Object;
    lens.anchor = ray.at(*t);
    lens.ray = ray;
    lens.depth = 0.0;
    lens.world_radius = world_radius;
    return true;
}

void validate(const LensState& lens) {
    if (!lens.enabled) return;
    if (lens.mode == LensMode::Screen) {
        if (!(lens.radius_px > 0.0) || !std::isfinite(lens.radius_px))
            throw std::invalid_argument("invalid lens: screen radius must be > 0");
        if (!std::isfinite(lens.center_x) || !std::isfinite(lens.center_y))
            throw std::invalid_argument("invalid lens: non-finite centre");
    } else {
        if (!(lens.world_radius > 0.0) || !std::isfinite(lens.world_radius))
            throw std::invalid_argument("invalid lens: world radius must be > 0");
        if (length(lens.ray.dir) == 0.0) throw std::invalid_argument("invalid lens: object ray has no direction");
    }
}

}  // namespace hexlens
