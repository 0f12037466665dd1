#include <algorithm>
#include <vector>

#include "doctest.h"
#include "hexlens/generators.hpp"
#include "hexlens/render.hpp"
#include "support.hpp"

using namespace hexlens;

namespace {

// Axis-aligned boxes as separate cells, corners in VTK order.
HexMesh boxes(const std::vector<std::pair<Vec3, Vec3>>& list) {
    std::vector<Vec3> v;
    std::vector<CellCorners> c;
    for (const auto& [lo, hi] : list) {
        Index base = static_cast<Index>(v.size());
        for (double z : {lo.z, hi.z}) {
            v.push_back({lo.x, lo.y, z});
            v.push_back({hi.x, lo.y, z});
            v.push_back({hi.x, hi.y, z});
            v.push_back({lo.x, hi.y, z});
        }
        CellCorners cc;
        for (Index k = 0; k < 8; ++k) cc[k] = base + k;
        c.push_back(cc);
    }
    return build_topology(std::move(v), std::move(c));
}

Scene scene_of(HexMesh mesh) {
    auto imp = jacobian_importance(mesh);
    return Scene::build(std::move(mesh), std::move(imp));
}

TransferFunction opaque_tf() {
    return TransferFunction({{0.0, {{0.2, 0.4, 0.6}, 1.0}}, {1.0, {{0.2, 0.4, 0.6}, 1.0}}});
}

RenderParams cube_view(int w = 64, int h = 64) {
    RenderParams p;
    p.width = w;
    p.height = h;
    p.camera = Camera{{0.5, 0.5, 4}, {0.5, 0.5, 0.5}, {0, 1, 0}, 40.0};
    p.silhouettes = false;
    p.threads = 1;
    return p;
}

// -1 outside, 1 inside, 0 within `eps` pixels of the projected outline.
int quad_side(const std::array<Vec3, 4>& q, double px, double py, double eps) {
    int pos = 0, neg = 0;
    for (int i = 0; i < 4; ++i) {
        const Vec3 &a = q[i], &b = q[(i + 1) % 4];
        double len = std::hypot(b.x - a.x, b.y - a.y);
        double d = ((b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)) / len;
        if (std::abs(d) <= eps) return 0;
        (d > 0 ? pos : neg)++;
    }
    return (pos == 4 || neg == 4) ? 1 : -1;
}

std::vector<float> edge_depths(const FragmentBuffer& buf, int x, int y) {
    std::vector<float> d;
    for (const auto& f : buf.pixel(x, y))
        if (f.kind == FragmentKind::ContextEdge || f.kind == FragmentKind::FocusEdge) d.push_back(f.depth);
    std::sort(d.begin(), d.end());
    return d;
}

bool same_image(const Image& a, const Image& b) { return a.width == b.width && a.height == b.height && a.rgba == b.rgba; }

}  // namespace

TEST_CASE("empty mesh renders background only") {
    Scene s = scene_of(HexMesh{});
    RenderParams p;
    p.width = 16;
    p.height = 8;
    p.background = Background::White;
    RenderResult r = render(s, p);
    CHECK(r.stats.fragments == 0);
    for (float v : r.image.rgba) CHECK(v == 1.0f);
}

TEST_CASE("cube fragment counts match a projected-quad oracle") {
    Scene s = scene_of(make_grid(1, 1, 1));
    RenderParams p = cube_view();
    p.face_alpha = 1.0;
    p.tf = opaque_tf();
    FragmentBuffer buf = rasterize(s, p);
    Projection proj(*p.camera, p.width, p.height, s.bounds);
    std::vector<std::array<Vec3, 4>> quads;
    for (Index f = 0; f < s.mesh.num_faces(); ++f) {
        std::array<Vec3, 4> q;
        for (int k = 0; k < 4; ++k) {
            Vec3 v = proj.to_view(s.mesh.vertex(s.mesh.face(f)[k]));
            q[k] = {proj.screen_x(v), proj.screen_y(v), 0};
        }
        quads.push_back(q);
    }
    int checked = 0, front = 0;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            int expect = 0;
            bool ambiguous = false;
            for (const auto& q : quads) {
                int side = quad_side(q, x + 0.5, y + 0.5, 1e-3);
                ambiguous = ambiguous || side == 0;
                expect += side == 1;
            }
            if (ambiguous) continue;
            ++checked;
            CAPTURE(x);
            CAPTURE(y);
            CHECK(buf.pixel(x, y).size() == static_cast<std::size_t>(expect));
            if (expect > 0) {
                CHECK(expect >= 2);
                ++front;
            }
        }
    CHECK(checked > 3500);
    CHECK(front > 400);
}

TEST_CASE("render is identical across thread counts and tile sizes") {
    Scene s = scene_of(make_demo_mesh());
    RenderParams p;
    p.width = 160;
    p.height = 120;
    LensState lens = LensState::screen(80, 60, 40);
    p.threads = 1;
    Image ref = render(s, p, lens).image;
    for (int threads : {2, 3, 8})
        for (int tile : {16, 64}) {
            p.threads = threads;
            p.tile_size = tile;
            CAPTURE(threads);
            CAPTURE(tile);
            CHECK(same_image(render(s, p, lens).image, ref));
        }
}

TEST_CASE("zero face opacity leaves only edge fragments") {
    Scene s = scene_of(make_demo_mesh());
    RenderParams p;
    p.width = 120;
    p.height = 90;
    p.tf = TransferFunction({{0.0, {{0.5, 0.5, 0.5}, 0.0}}, {1.0, {{0.5, 0.5, 0.5}, 0.0}}});
    FragmentBuffer buf = rasterize(s, p);
    REQUIRE(buf.size() > 0);
    for (const auto& f : buf.records()) CHECK(f.kind == FragmentKind::ContextEdge);
}

TEST_CASE("lod gating: coarser edge fragments are a subset") {
    Scene s = scene_of(make_demo_mesh());
    REQUIRE(s.lod.level_count >= 2);
    RenderParams p;
    p.width = 120;
    p.height = 90;
    p.delta = 1.1;
    p.face_alpha = 0.0;
    for (int lod = 0; lod + 1 < s.lod.level_count; ++lod) {
        p.lod = lod;
        FragmentBuffer fine = rasterize(s, p);
        p.lod = lod + 1;
        FragmentBuffer coarse = rasterize(s, p);
        CHECK(coarse.size() <= fine.size());
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) {
                auto f = edge_depths(fine, x, y), c = edge_depths(coarse, x, y);
                CHECK(std::includes(f.begin(), f.end(), c.begin(), c.end()));
            }
    }
}

TEST_CASE("lens produces focus fragments and halos") {
    Scene s = scene_of(make_demo_mesh());
    RenderParams p;
    p.width = 160;
    p.height = 120;
    FragmentBuffer none = rasterize(s, p);
    for (const auto& f : none.records()) {
        CHECK(f.kind != FragmentKind::Halo);
        CHECK(f.kind != FragmentKind::FocusEdge);
        CHECK(f.kind != FragmentKind::FocusFace);
    }
    FragmentBuffer lensed = rasterize(s, p, LensState::screen(80, 60, 40));
    int focus_edges = 0, halos = 0;
    for (const auto& f : lensed.records()) {
        focus_edges += f.kind == FragmentKind::FocusEdge;
        halos += f.kind == FragmentKind::Halo;
        if (f.kind == FragmentKind::Halo) CHECK(f.r == 1.0f);
    }
    CHECK(focus_edges > 0);
    CHECK(halos > 0);
}

TEST_CASE("silhouette mask on synthetic depth") {
    const int w = 12, h = 10;
    std::vector<float> flat(w * h, 0.4f);
    auto m = silhouette_mask(flat, w, h, 0.01);
    CHECK(std::count(m.begin(), m.end(), 1) == 0);

    std::vector<float> ramp(w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ramp[y * w + x] = 0.05f * x;
    m = silhouette_mask(ramp, w, h, 0.01);
    CHECK(std::count(m.begin(), m.end(), 1) == 0);

    std::vector<float> step(w * h, 0.2f);
    for (int y = 0; y < h; ++y)
        for (int x = 6; x < w; ++x) step[y * w + x] = 0.6f;
    m = silhouette_mask(step, w, h, 0.01);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) CHECK(m[y * w + x] == (x == 5 || x == 6 ? 1 : 0));
}

TEST_CASE("cube silhouette follows the projected outline") {
    Scene s = scene_of(make_grid(1, 1, 1));
    RenderParams p = cube_view(80, 64);
    p.camera = Camera::orbit({0.5, 0.5, 0.5}, 30, 20, 4);
    auto depth = boundary_depth(s, p);
    auto mask = silhouette_mask(depth, p.width, p.height, p.silhouette_threshold);
    auto covered = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < p.width && y < p.height && depth[y * p.width + x] < kNoDepth;
    };
    int outline = 0;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            bool c = covered(x, y);
            bool jump = false, deep = c;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    bool n = x + dx >= 0 && y + dy >= 0 && x + dx < p.width && y + dy < p.height;
                    if (!n) continue;
                    if (std::abs(dx) + std::abs(dy) == 1 && covered(x + dx, y + dy) != c) jump = true;
                    if (!covered(x + dx, y + dy)) deep = false;
                }
            CAPTURE(x);
            CAPTURE(y);
            if (jump) {
                ++outline;
                CHECK(mask[y * p.width + x] == 1);
            }
            if (deep) CHECK(mask[y * p.width + x] == 0);
        }
    CHECK(outline > 50);
}

TEST_CASE("overlapping boxes get an interior silhouette") {
    Scene s = scene_of(boxes({{{-1, -1, -3}, {2, 2, -2}}, {{0, 0, 0}, {1, 1, 1}}}));
    RenderParams p = cube_view(80, 80);
    p.camera = Camera{{0.5, 0.5, 6}, {0.5, 0.5, 0}, {0, 1, 0}, 40.0};
    auto depth = boundary_depth(s, p);
    auto mask = silhouette_mask(depth, p.width, p.height, p.silhouette_threshold);
    // front box depths are well below the back box's
    Projection proj(*p.camera, p.width, p.height, s.bounds);
    const float split = static_cast<float>(proj.depth(6.0 - (-0.5)));
    auto region = [&](int x, int y) {
        float d = depth[y * p.width + x];
        return d >= kNoDepth ? 0 : (d < split ? 2 : 1);
    };
    int interior = 0;
    for (int y = 1; y + 1 < p.height; ++y)
        for (int x = 1; x + 1 < p.width; ++x) {
            int r = region(x, y);
            if (r != 2) continue;
            bool border = false;
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) border = border || region(x + dx, y + dy) == 1;
            if (border) {
                ++interior;
                CHECK(mask[y * p.width + x] == 1);
            }
        }
    CHECK(interior > 20);
}

TEST_CASE("object lens picking") {
    Scene s = scene_of(make_grid(1, 1, 1));
    RenderParams p = cube_view();
    LensState lens;
    REQUIRE(pick_object_lens(32, 32, s, p, 0.4, lens));
    CHECK(lens.enabled);
    CHECK(lens.mode == LensMode::Object);
    CHECK(lens.anchor.x == doctest::Approx(0.5));
    CHECK(lens.anchor.y == doctest::Approx(0.5));
    CHECK(lens.anchor.z == doctest::Approx(1.0));
    CHECK(lens.world_radius == 0.4);
    CHECK(lens.depth == 0.0);

    Ray stored = lens.ray;
    lens.depth = 0.3;
    Vec3 expect = lens.anchor + stored.dir * 0.3;
    CHECK(length(lens.lens_point() - expect) == doctest::Approx(0.0));
    CHECK(lens.lens_point().z == doctest::Approx(0.7));

    // a later camera change does not touch the stored ray
    p.camera = Camera::orbit({0.5, 0.5, 0.5}, 80, 10, 3);
    render(s, p, lens);
    CHECK(lens.ray == stored);

    LensState before = lens;
    CHECK_FALSE(pick_object_lens(0, 0, s, cube_view(), 0.4, lens));
    CHECK(lens == before);
}

TEST_CASE("capacity overflow names the required capacity") {
    Scene s = scene_of(make_grid(2, 2, 2));
    RenderParams p = cube_view(96, 64);
    p.face_alpha = 1.0;
    p.tf = opaque_tf();
    Image unbounded = render(s, p).image;
    p.fragment_capacity = 16;
    std::size_t required = 0;
    try {
        render(s, p);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        required = e.required();
        CHECK(e.capacity() == 16);
        CHECK(required > 16);
    }
    p.fragment_capacity = required;
    CHECK(same_image(render(s, p).image, unbounded));
}

TEST_CASE("parameter validation") {
    RenderParams ok;
    CHECK_NOTHROW(validate(ok));
    auto bad = [&](auto mutate) {
        RenderParams p;
        mutate(p);
        CHECK_THROWS_AS(validate(p), std::invalid_argument);
    };
    bad([](RenderParams& p) { p.width = 0; });
    bad([](RenderParams& p) { p.face_alpha = 1.5; });
    bad([](RenderParams& p) { p.accent = 0.5; });
    bad([](RenderParams& p) { p.desaturation = -0.1; });
    bad([](RenderParams& p) { p.tile_size = 4; });
    bad([](RenderParams& p) { p.camera = Camera{{0, 0, 0}, {0, 0, 0}, {0, 1, 0}, 40}; });
    bad([](RenderParams& p) { p.camera = Camera{{0, 0, 1}, {0, 0, 0}, {0, 1, 0}, 180}; });

    LensState l = LensState::screen(0, 0, 0);
    CHECK_THROWS_AS(validate(l), std::invalid_argument);
    l.enabled = false;
    CHECK_NOTHROW(validate(l));
    CHECK_THROWS_AS(validate(LensState::object({0, 0, 0}, -1)), std::invalid_argument);
}

TEST_CASE("defaults derive from the scene") {
    Scene s = scene_of(make_grid(3, 3, 3, 0.5));
    RenderParams p;
    ShadingParams sp = resolve_shading(s, p);
    CHECK(sp.w_base == doctest::Approx(0.15 * 0.5));
    CHECK(sp.lod == std::max(0, s.lod.level_count - 2));
    p.lod = 0;
    p.w_base = 0.2;
    sp = resolve_shading(s, p);
    CHECK(sp.lod == 0);
    CHECK(sp.w_base == 0.2);
    CHECK(mesh_buffer_bytes(make_grid(1, 1, 1)) == 8 * 16 + 32 + 6 * 16 + 12 * 16);
}

TEST_CASE("importance from a named field") {
    MeshFile file;
    file.mesh = make_grid(2, 1, 1);
    file.fields.push_back({"pressure", FieldLocation::Cell, {3.0, 5.0}});
    file.fields.push_back({"temp", FieldLocation::Vertex, std::vector<double>(12, 1.0)});
    AttributeField a = importance_for_metric(file, "field:pressure");
    REQUIRE(a.per_cell.size() == 2);
    CHECK(a.per_cell[0] < a.per_cell[1]);
    CHECK(importance_for_metric(file, "field:temp").per_cell.size() == 2);
    CHECK(importance_for_metric(file, "scaled-jacobian").per_cell.size() == 2);
    CHECK_THROWS_AS(importance_for_metric(file, "field:nope"), std::invalid_argument);
    CHECK_THROWS_AS(importance_for_metric(file, "volume"), std::invalid_argument);
}
