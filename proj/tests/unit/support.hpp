#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "hexlens/generators.hpp"
#include "hexlens/mesh.hpp"

namespace hexlens::test {

/// splitmix64; generators below draw from it so every property test is
/// reproducible from its seed.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
    bool coin(double p = 0.5) { return uniform() < p; }
};

/// A random grid-derived mesh: random dims, optional cell deletion (keeping
/// the lowest cell), optional jitter.
inline HexMesh random_mesh(Rng& rng, int max_dim = 4, double delete_p = 0.0) {
    int n1 = rng.integer(1, max_dim), n2 = rng.integer(1, max_dim), n3 = rng.integer(1, max_dim);
    HexMesh grid = make_grid(n1, n2, n3);
    std::vector<CellCorners> cells;
    for (Index c = 0; c < grid.num_cells(); ++c)
        if (c == 0 || !rng.coin(delete_p)) cells.push_back(grid.cell(c));
    HexMesh m = build_topology(grid.vertices(), cells);
    if (rng.coin()) m = jitter_interior(m, 0.2, rng.next());
    return m;
}

/// Sorted vertex sets of all cell edges / faces, deduplicated by brute force.
inline std::set<std::array<Index, 2>> brute_edges(const std::vector<CellCorners>& cells) {
    std::set<std::array<Index, 2>> out;
    for (const auto& c : cells)
        for (const auto& e : hex::kEdges) {
            std::array<Index, 2> k{c[e[0]], c[e[1]]};
            std::sort(k.begin(), k.end());
            out.insert(k);
        }
    return out;
}

inline std::set<std::array<Index, 4>> brute_faces(const std::vector<CellCorners>& cells) {
    std::set<std::array<Index, 4>> out;
    for (const auto& c : cells)
        for (const auto& f : hex::kFaces) {
            std::array<Index, 4> k{c[f[0]], c[f[1]], c[f[2]], c[f[3]]};
            std::sort(k.begin(), k.end());
            out.insert(k);
        }
    return out;
}

}  // namespace hexlens::test
