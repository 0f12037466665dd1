#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hexlens/camera.hpp"
#include "hexlens/vec.hpp"

namespace hexlens {

/// Linear RGB in [0,1], stored in a Vec3 as (r, g, b).
using Rgb = Vec3;

struct Rgba {
    Rgb rgb;
    double a = 0.0;
    bool operator==(const Rgba&) const = default;
};

class TransferFunctionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Piecewise-linear importance -> (colour, opacity) map.
class TransferFunction {
public:
    struct Point {
        double x = 0.0;
        Rgba value;
        bool operator==(const Point&) const = default;
    };

    /// Blue (opacity 0) at importance 0 to red (opacity 1) at importance 1.
    TransferFunction();
    /// Throws TransferFunctionError unless there are >= 2 points with
    /// non-decreasing x in [0,1] and all channels in [0,1].
    explicit TransferFunction(std::vector<Point> points);

    Rgba operator()(double x) const;
    Rgb color(double x) const { return (*this)(x).rgb; }
    double opacity(double x) const { return (*this)(x).a; }
    /// Upper bound of the opacity over [lo, hi].
    double max_opacity(double lo, double hi) const;

    const std::vector<Point>& points() const { return points_; }
    bool operator==(const TransferFunction&) const = default;

private:
    std::vector<Point> points_;
};

enum class LensMode { Screen, Object };

struct LensState {
    bool enabled = false;
    LensMode mode = LensMode::Screen;
    // screen lens, pixels
    double center_x = 0.0, center_y = 0.0, radius_px = 100.0;
    // object lens, model units; the lens point is anchor + depth * ray.dir
    Vec3 anchor;
    Ray ray;
    double depth = 0.0;
    double world_radius = 1.0;

    Vec3 lens_point() const { return anchor + ray.dir * depth; }
    static LensState screen(double cx, double cy, double radius);
    static LensState object(const Vec3& point, double radius);
    bool operator==(const LensState&) const = default;
};

inline double smoothstep(double a, double b, double x) {
    double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct FocusSample {
    double focus = 0.0;  // [0,1]
    double dist = 1.0;   // lens-radius units, >= 0
};

/// focus = 1 - smoothstep(0.7, 1, dist).
inline double focus_from_dist(double dist) { return 1.0 - smoothstep(0.7, 1.0, dist); }

/// Disabled lens: focus 0, dist 1.
FocusSample focus_factor(double px, double py, const Vec3& world, const LensState& lens);

struct EdgeInput {
    Vec3 a, b;                  // endpoints, object space
    double importance_a = 0.0;  // per-vertex importance at a
    double importance_b = 0.0;
    double attr = 0.0;          // e_attr
    int level = 0;              // e_level
};

/// Everything a fragment of one face needs, shared by both its triangles.
/// Edge i joins corners i and i+1.
struct FaceFragmentInputs {
    std::array<Vec3, 4> corners;
    std::array<EdgeInput, 4> edges;
};

struct EdgeDistance {
    double d = std::numeric_limits<double>::infinity();
    int edge = -1;   // local edge 0..3, -1 when the mask is empty
    double t = 0.0;  // closest-point parameter along the edge
};

/// Nearest edge among those whose bit is set in `mask` (bit i = edge i).
EdgeDistance edge_distance(const Vec3& p, const FaceFragmentInputs& face, unsigned mask = 0xF);

enum class FragmentKind : std::uint8_t { FocusEdge, ContextEdge, FocusFace, ContextFace, Halo, Silhouette };

const char* to_string(FragmentKind k);

struct ShadingParams {
    double w_base = 0.1;
    double delta = 0.7;        // importance threshold for focus edges
    int lod = 0;
    double accent = 1.5;       // s
    double face_alpha = 0.3;   // user face opacity
    double halo_width = 0.5;   // halo band factor
    double halo_offset = 0.002;
    double desaturation = 0.3;
    TransferFunction tf;
};

struct ShadeResult {
    Rgb color;           // premultiplied C
    double alpha = 0.0;  // clamped to [0,1]
    double alpha_raw = 0.0;
    FragmentKind kind = FragmentKind::ContextFace;

    // intermediate terms
    double alpha_e = 0.0, s_e = 1.0, alpha_f = 0.0;
    bool e_focus = false, e_context = false;
    EdgeDistance nearest;  // the edge that colours the fragment
    double w = 0.0;
};

/// Fragment shading for a point `p` on a face. `importance` is the
/// interpolated per-vertex importance of the fragment and `depth` its
/// normalized depth (used for desaturation only).
ShadeResult shade_fragment(const Vec3& p, double importance, double depth, const FaceFragmentInputs& face,
                           FocusSample fs, const ShadingParams& params);

struct HaloResult {
    bool emitted = false;
    double alpha = 0.0;
    double depth = 0.0;
};

/// White halo behind focus edges: the band w < d <= w * (1 + halo_width *
/// focus) around the nearest focus edge, pushed back by `halo_offset`.
HaloResult emit_halo(const ShadeResult& shaded, double depth, FocusSample fs, const ShadingParams& params);

}  // namespace hexlens
