#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hexlens/camera.hpp"
#include "hexlens/fragments.hpp"
#include "hexlens/image.hpp"
#include "hexlens/lod.hpp"
#include "hexlens/mesh.hpp"
#include "hexlens/mesh_io.hpp"
#include "hexlens/quality.hpp"
#include "hexlens/shading.hpp"

namespace hexlens {

/// Mesh plus everything derived from it once per load. Immutable after
/// construction and shared read-only by render workers.
struct Scene {
    HexMesh mesh;
    AttributeField importance;  // per_cell in [0,1], per_vertex/per_edge max-aggregated
    std::size_t sheet_count = 0;
    LodEdgeStructure lod;
    Aabb bounds;
    double mean_edge_length = 0.0;
    std::vector<std::uint8_t> face_boundary;

    /// Extracts sheets and builds the LoD structure.
    static Scene build(HexMesh mesh, AttributeField importance);
    /// Uses the supplied LoD instead of building one.
    static Scene assemble(HexMesh mesh, AttributeField importance, LodEdgeStructure lod, std::size_t sheet_count);
};

/// Importance from the scaled Jacobian (high deformation -> high importance).
AttributeField jacobian_importance(const HexMesh& mesh);

/// `scaled-jacobian` or `field:<name>` (a cell field, or a vertex field
/// averaged onto cells). Throws std::invalid_argument for unknown metrics or
/// missing fields.
AttributeField importance_for_metric(const MeshFile& file, const std::string& metric);

/// Size of the render-side mesh buffers: float32 positions, uint32 cell,
/// face and edge indices, float32 importance per vertex and edge, int32
/// e_level per edge.
std::size_t mesh_buffer_bytes(const HexMesh& mesh);

enum class Background { Black, White };

const char* to_string(Background b);
Rgb background_color(Background b);

struct RenderParams {
    int width = 1280, height = 720;
    std::optional<Camera> camera;  // unset: fit_camera(bounds)
    double w_base = 0.0;           // <= 0: 0.15 * mean edge length
    double delta = 0.7;
    int lod = -1;                  // < 0: max(0, level_count - 2)
    double accent = 1.5;
    double face_alpha = 0.3;
    TransferFunction tf;
    Background background = Background::Black;
    double halo_width = 0.5;
    double halo_offset = 0.002;
    double desaturation = 0.3;
    bool silhouettes = true;
    double silhouette_threshold = 0.01;
    std::size_t fragment_capacity = 0;  // per fragment buffer; 0 = unbounded
    int threads = 0;                    // 0 = hardware concurrency; capped by HEXLENS_THREADS
    int tile_size = 64;

    bool operator==(const RenderParams&) const = default;
};

/// Throws std::invalid_argument naming the first out-of-range field.
void validate(const RenderParams& p);
/// Enabled lenses need a positive radius (and a ray direction in object mode).
void validate(const LensState& lens);

Camera resolve_camera(const Scene& scene, const RenderParams& p);
int resolve_lod(const Scene& scene, const RenderParams& p);
ShadingParams resolve_shading(const Scene& scene, const RenderParams& p);
/// min(requested or hardware concurrency, HEXLENS_THREADS), at least 1.
int resolve_threads(int requested);

/// Per-face fragment inputs (corner positions, edge records) for face `f`.
FaceFragmentInputs face_inputs(const Scene& scene, Index f);

struct RenderStats {
    std::size_t triangles = 0;
    std::size_t fragments = 0;
    std::size_t max_buffer_fragments = 0;
    std::size_t tiles = 0;
    int threads = 1;
    int lod = 0;
    double setup_ms = 0.0;
    double shade_ms = 0.0;       // rasterization + fragment shading, summed over workers
    double composite_ms = 0.0;   // sort + blend, summed over workers
    double silhouette_ms = 0.0;
    double total_ms = 0.0;       // wall clock
};

struct RenderResult {
    Image image;
    RenderStats stats;
};

/// Full pipeline: tiled rasterization and shading, per-tile sort and
/// composite, silhouette overlay. Throws CapacityError (with the largest
/// per-tile requirement) when a tile exceeds `fragment_capacity`.
RenderResult render(const Scene& scene, const RenderParams& params, const LensState& lens = {});

/// Single fragment buffer covering the whole image, finalized.
FragmentBuffer rasterize(const Scene& scene, const RenderParams& params, const LensState& lens = {});

/// Opaque depth of the boundary surface per pixel; kNoDepth where empty.
inline constexpr float kNoDepth = 2.0f;
std::vector<float> boundary_depth(const Scene& scene, const RenderParams& params);

/// Pixels on either side of a depth step larger than `threshold` to a
/// 4-neighbour, where the step also lies more than `threshold` outside the
/// range of the adjacent steps along the same row or column.
std::vector<std::uint8_t> silhouette_mask(const std::vector<float>& depth, int width, int height, double threshold);
void silhouette_pass(const Scene& scene, const RenderParams& params, Image& image);

/// Nearest boundary-surface hit along `ray`, as a ray parameter.
std::optional<double> intersect_boundary(const HexMesh& mesh, const Ray& ray);

/// Picks the object lens anchor under pixel (px, py). On a miss `lens` is
/// left unchanged and false is returned.
bool pick_object_lens(double px, double py, const Scene& scene, const RenderParams& params, double world_radius,
                      LensState& lens);

}  // namespace hexlens
