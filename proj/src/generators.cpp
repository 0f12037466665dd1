#include "hexlens/generators.hpp"

#include <cmath>
#include <map>
#include <random>

#include "hexlens/quality.hpp"

namespace hexlens {

namespace {

/// Collects vertices with position-based welding so blocks share interfaces.
class Welder {
public:
    explicit Welder(double quantum) : quantum_(quantum) {}

    Index add(const Vec3& p) {
        std::array<std::int64_t, 3> key{std::llround(p.x / quantum_), std::llround(p.y / quantum_),
                                        std::llround(p.z / quantum_)};
        auto [it, inserted] = index_.try_emplace(key, static_cast<Index>(vertices_.size()));
        if (inserted) vertices_.push_back(p);
        return it->second;
    }

    void add_cell(CellCorners c) {
        // flip to positive orientation when the block parametrisation is mirrored
        std::array<Vec3, 8> p;
        for (int k = 0; k < 8; ++k) p[k] = vertices_[c[k]];
        if (tetrakis_volume(p) < 0.0) {
            std::swap(c[1], c[3]);
            std::swap(c[5], c[7]);
        }
        cells_.push_back(c);
    }

    HexMesh build() { return build_topology(std::move(vertices_), std::move(cells_)); }

private:
    double quantum_;
    std::map<std::array<std::int64_t, 3>, Index> index_;
    std::vector<Vec3> vertices_;
    std::vector<CellCorners> cells_;
};

/// Adds an n1 x n2 x n3 block given a map from unit-cube parameters to space.
template <typename Map>
void add_block(Welder& w, int n1, int n2, int n3, Map&& map) {
    std::vector<Index> ids(static_cast<std::size_t>((n1 + 1) * (n2 + 1) * (n3 + 1)));
    auto at = [&](int i, int j, int k) -> Index& { return ids[i + (n1 + 1) * (j + (n2 + 1) * k)]; };
    for (int k = 0; k <= n3; ++k)
        for (int j = 0; j <= n2; ++j)
            for (int i = 0; i <= n1; ++i)
                at(i, j, k) = w.add(map(double(i) / n1, double(j) / n2, double(k) / n3));
    for (int k = 0; k < n3; ++k)
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < n1; ++i)
                w.add_cell({at(i, j, k), at(i + 1, j, k), at(i + 1, j + 1, k), at(i, j + 1, k),
                            at(i, j, k + 1), at(i + 1, j, k + 1), at(i + 1, j + 1, k + 1), at(i, j + 1, k + 1)});
}

}  // namespace

HexMesh make_grid(int n1, int n2, int n3, double h) {
    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>((n1 + 1) * (n2 + 1) * (n3 + 1)));
    for (int k = 0; k <= n3; ++k)
        for (int j = 0; j <= n2; ++j)
            for (int i = 0; i <= n1; ++i) vertices.push_back({i * h, j * h, k * h});
    auto id = [&](int i, int j, int k) { return static_cast<Index>(i + (n1 + 1) * (j + (n2 + 1) * k)); };
    std::vector<CellCorners> cells;
    cells.reserve(static_cast<std::size_t>(n1 * n2 * n3));
    for (int k = 0; k < n3; ++k)
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < n1; ++i)
                cells.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
                                 id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)});
    return build_topology(std::move(vertices), std::move(cells));
}

HexMesh make_ball(int n, int layers, double radius) {
    const double a = radius * 0.45;
    Welder w(radius * 1e-9);
    add_block(w, n, n, n, [&](double u, double v, double t) {
        return Vec3{a * (2 * u - 1), a * (2 * v - 1), a * (2 * t - 1)};
    });
    // shell block for each of the six core faces: (axis, sign)
    for (int axis = 0; axis < 3; ++axis)
        for (int sign : {-1, 1}) {
            add_block(w, n, n, layers, [&](double u, double v, double t) {
                double p[3];
                double s = 2 * u - 1, q = 2 * v - 1;
                p[axis] = sign;
                p[(axis + 1) % 3] = s;
                p[(axis + 2) % 3] = q;
                Vec3 inner{a * p[0], a * p[1], a * p[2]};
                Vec3 outer = normalize(Vec3{p[0], p[1], p[2]}) * radius;
                return lerp(inner, outer, t);
            });
        }
    return w.build();
}

HexMesh make_twisted_l(int n, int depth, double twist) {
    Welder w(1e-9);
    const double h = 1.0 / n;
    // three n x n x depth blocks: (0,0), (1,0), (0,1) quadrants
    for (auto [qx, qy] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}}) {
        add_block(w, n, n, depth, [&](double u, double v, double t) {
            double z = t * depth * h;
            Vec3 p{(qx + u) * n * h - 1.0, (qy + v) * n * h - 1.0, z};
            double ang = twist * t;
            return Vec3{p.x * std::cos(ang) - p.y * std::sin(ang), p.x * std::sin(ang) + p.y * std::cos(ang), p.z};
        });
    }
    return w.build();
}

HexMesh twist_z(const HexMesh& mesh, double radians_per_unit) {
    std::vector<Vec3> verts = mesh.vertices();
    const Aabb box = mesh.bounds();
    const Vec3 c = box.center();
    for (auto& p : verts) {
        double ang = radians_per_unit * (p.z - box.lo.z);
        double x = p.x - c.x, y = p.y - c.y;
        p = {c.x + x * std::cos(ang) - y * std::sin(ang), c.y + x * std::sin(ang) + y * std::cos(ang), p.z};
    }
    return build_topology(std::move(verts), mesh.cells());
}

HexMesh jitter_interior(const HexMesh& mesh, double amplitude, std::uint64_t seed) {
    // raw engine bits: std distributions differ between standard libraries
    std::mt19937_64 rng(seed);
    auto dist = [](std::mt19937_64& r) { return static_cast<double>(r() >> 11) * 0x1.0p-52 - 1.0; };
    double scale = amplitude * mesh.mean_edge_length();
    std::vector<Vec3> verts = mesh.vertices();
    for (Index v = 0; v < verts.size(); ++v) {
        Vec3 d{dist(rng), dist(rng), dist(rng)};
        if (!mesh.is_boundary_vertex(v)) verts[v] += d * scale;
    }
    return build_topology(std::move(verts), mesh.cells());
}

HexMesh make_demo_mesh() { return twist_z(jitter_interior(make_grid(4, 4, 4, 0.25), 0.2, 42), 0.8); }

HexMesh make_perf_mesh() { return jitter_interior(make_ball(15, 15), 0.15, 7); }

}  // namespace hexlens
