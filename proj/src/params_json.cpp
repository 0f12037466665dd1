#include "hexlens/params_json.hpp"

#include <cmath>
#include <set>

namespace hexlens {

namespace {

[[noreturn]] void fail(const std::string& what) { throw ParamsError(what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) fail("unknown key '" + it.key() + "' in " + where);
}

double number(const json& v, const std::string& name) {
    if (!v.is_number()) fail(name + " must be a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(name + " must be finite");
    return d;
}

int integer(const json& v, const std::string& name) {
    if (!v.is_number_integer()) fail(name + " must be an integer");
    auto i = v.get<long long>();
    if (i < -1'000'000'000 || i > 1'000'000'000) fail(name + " out of range");
    return static_cast<int>(i);
}

bool boolean(const json& v, const std::string& name) {
    if (!v.is_boolean()) fail(name + " must be a boolean");
    return v.get<bool>();
}

Vec3 vec3(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() != 3) fail(name + " must be an array of 3 numbers");
    return {number(v[0], name), number(v[1], name), number(v[2], name)};
}

json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <typename Fn>
void with(const json& obj, const char* key, Fn&& fn) {
    auto it = obj.find(key);
    if (it != obj.end()) fn(*it);
}

void apply_lens(const json& doc, LensState& lens) {
    check_keys(doc, "lens", {"enabled", "mode", "center", "radius", "point", "anchor", "ray", "depth"});
    with(doc, "mode", [&](const json& v) {
        if (v == "screen") lens.mode = LensMode::Screen;
        else if (v == "object") lens.mode = LensMode::Object;
        else fail("lens.mode must be \"screen\" or \"object\"");
    });
    // an explicit geometry implies the lens is wanted
    bool geometry = doc.contains("center") || doc.contains("point") || doc.contains("anchor");
    if (geometry) lens.enabled = true;
    with(doc, "enabled", [&](const json& v) { lens.enabled = boolean(v, "lens.enabled"); });
    with(doc, "center", [&](const json& v) {
        if (!v.is_array() || v.size() != 2) fail("lens.center must be [x, y]");
        lens.center_x = number(v[0], "lens.center");
        lens.center_y = number(v[1], "lens.center");
        if (!doc.contains("mode")) lens.mode = LensMode::Screen;
    });
    auto set_anchor = [&](const json& v) {
        lens.anchor = vec3(v, "lens.point");
        if (!doc.contains("ray")) lens.ray = {lens.anchor, {0, 0, 1}};
        if (!doc.contains("depth")) lens.depth = 0.0;
        if (!doc.contains("mode")) lens.mode = LensMode::Object;
    };
    with(doc, "point", set_anchor);
    with(doc, "anchor", set_anchor);
    with(doc, "ray", [&](const json& v) {
        check_keys(v, "lens.ray", {"origin", "dir"});
        if (!v.contains("origin") || !v.contains("dir")) fail("lens.ray needs origin and dir");
        Vec3 dir = vec3(v["dir"], "lens.ray.dir");
        if (length(dir) == 0.0) fail("lens.ray.dir must be non-zero");
        // unit directions are kept bit-exact so serialized states re-apply unchanged
        if (std::abs(length(dir) - 1.0) > 1e-12) dir = normalize(dir);
        lens.ray = {vec3(v["origin"], "lens.ray.origin"), dir};
    });
    with(doc, "depth", [&](const json& v) { lens.depth = number(v, "lens.depth"); });
    // after the geometry keys, which may switch the mode
    with(doc, "radius", [&](const json& v) {
        double r = number(v, "lens.radius");
        if (!(r > 0.0)) fail("lens.radius must be > 0");
        if (lens.mode == LensMode::Screen) lens.radius_px = r;
        else lens.world_radius = r;
    });
}

void apply_camera(const json& doc, RenderParams& p) {
    if (doc.is_null()) {
        p.camera.reset();
        return;
    }
    check_keys(doc, "camera", {"eye", "target", "up", "fov_y_deg"});
    Camera cam = p.camera.value_or(Camera{});
    with(doc, "eye", [&](const json& v) { cam.eye = vec3(v, "camera.eye"); });
    with(doc, "target", [&](const json& v) { cam.target = vec3(v, "camera.target"); });
    with(doc, "up", [&](const json& v) { cam.up = vec3(v, "camera.up"); });
    with(doc, "fov_y_deg", [&](const json& v) { cam.fov_y_deg = number(v, "camera.fov_y_deg"); });
    p.camera = cam;
}

void apply_orbit(const json& doc, RenderParams& p) {
    check_keys(doc, "orbit", {"azimuth", "elevation", "distance", "target", "fov_y_deg"});
    double az = doc.contains("azimuth") ? number(doc["azimuth"], "orbit.azimuth") : 35.0;
    double el = doc.contains("elevation") ? number(doc["elevation"], "orbit.elevation") : 25.0;
    double fov = doc.contains("fov_y_deg") ? number(doc["fov_y_deg"], "orbit.fov_y_deg") : 40.0;
    if (!doc.contains("distance")) fail("orbit.distance is required");
    double dist = number(doc["distance"], "orbit.distance");
    if (!(dist > 0.0)) fail("orbit.distance must be > 0");
    Vec3 target = doc.contains("target") ? vec3(doc["target"], "orbit.target") : Vec3{};
    p.camera = Camera::orbit(target, az, el, dist, fov);
}

}  // namespace

TransferFunction transfer_function_from_json(const json& doc) {
    const json& pts = doc.is_object() && doc.contains("points") ? doc["points"] : doc;
    if (doc.is_object()) check_keys(doc, "transfer_function", {"points"});
    if (!pts.is_array()) fail("transfer_function.points must be an array");
    std::vector<TransferFunction::Point> points;
    for (const auto& item : pts) {
        check_keys(item, "transfer_function point", {"x", "color", "opacity"});
        if (!item.contains("x") || !item.contains("color") || !item.contains("opacity"))
            fail("transfer_function points need x, color and opacity");
        TransferFunction::Point p;
        p.x = number(item["x"], "transfer_function.x");
        p.value.rgb = vec3(item["color"], "transfer_function.color");
        p.value.a = number(item["opacity"], "transfer_function.opacity");
        points.push_back(p);
    }
    try {
        return TransferFunction(std::move(points));
    } catch (const TransferFunctionError& e) {
        fail(e.what());
    }
}

void apply_json(const json& doc, ViewState& state) {
    if (doc.is_null()) return;
    check_keys(doc, "render request",
               {"width", "height", "camera", "orbit", "w_base", "delta", "lod", "accent", "face_alpha",
                "transfer_function", "background", "halo_width", "halo_offset", "desaturation", "silhouettes",
                "silhouette_threshold", "fragment_capacity", "threads", "tile_size", "lens"});
    ViewState next = state;
    RenderParams& p = next.params;
    with(doc, "width", [&](const json& v) { p.width = integer(v, "width"); });
    with(doc, "height", [&](const json& v) { p.height = integer(v, "height"); });
    with(doc, "camera", [&](const json& v) { apply_camera(v, p); });
    with(doc, "orbit", [&](const json& v) { apply_orbit(v, p); });
    with(doc, "w_base", [&](const json& v) { p.w_base = number(v, "w_base"); });
    with(doc, "delta", [&](const json& v) { p.delta = number(v, "delta"); });
    with(doc, "lod", [&](const json& v) { p.lod = integer(v, "lod"); });
    with(doc, "accent", [&](const json& v) { p.accent = number(v, "accent"); });
    with(doc, "face_alpha", [&](const json& v) { p.face_alpha = number(v, "face_alpha"); });
    with(doc, "transfer_function", [&](const json& v) { p.tf = transfer_function_from_json(v); });
    with(doc, "background", [&](const json& v) {
        if (v == "black") p.background = Background::Black;
        else if (v == "white") p.background = Background::White;
        else fail("background must be \"black\" or \"white\"");
    });
    with(doc, "halo_width", [&](const json& v) { p.halo_width = number(v, "halo_width"); });
    with(doc, "halo_offset", [&](const json& v) { p.halo_offset = number(v, "halo_offset"); });
    with(doc, "desaturation", [&](const json& v) { p.desaturation = number(v, "desaturation"); });
    with(doc, "silhouettes", [&](const json& v) { p.silhouettes = boolean(v, "silhouettes"); });
    with(doc, "silhouette_threshold",
         [&](const json& v) { p.silhouette_threshold = number(v, "silhouette_threshold"); });
    with(doc, "fragment_capacity", [&](const json& v) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail("fragment_capacity must be a non-negative integer");
        p.fragment_capacity = v.get<std::size_t>();
    });
    with(doc, "threads", [&](const json& v) { p.threads = integer(v, "threads"); });
    with(doc, "tile_size", [&](const json& v) { p.tile_size = integer(v, "tile_size"); });
    with(doc, "lens", [&](const json& v) {
        if (v.is_null()) next.lens = LensState{};
        else apply_lens(v, next.lens);
    });
    try {
        validate(next.params);
        validate(next.lens);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    state = std::move(next);
}

json to_json(const TransferFunction& tf) {
    json pts = json::array();
    for (const auto& p : tf.points())
        pts.push_back({{"x", p.x}, {"color", to_json(p.value.rgb)}, {"opacity", p.value.a}});
    return {{"points", pts}};
}

json to_json(const LensState& lens) {
    json j{{"enabled", lens.enabled}, {"mode", lens.mode == LensMode::Screen ? "screen" : "object"}};
    if (lens.mode == LensMode::Screen) {
        j["center"] = json::array({lens.center_x, lens.center_y});
        j["radius"] = lens.radius_px;
    } else {
        j["anchor"] = to_json(lens.anchor);
        j["ray"] = {{"origin", to_json(lens.ray.origin)}, {"dir", to_json(lens.ray.dir)}};
        j["depth"] = lens.depth;
        j["radius"] = lens.world_radius;
        j["point"] = to_json(lens.lens_point());
    }
    return j;
}

json to_json(const ViewState& state) {
    const RenderParams& p = state.params;
    json j{{"width", p.width},
           {"height", p.height},
           {"w_base", p.w_base},
           {"delta", p.delta},
           {"lod", p.lod},
           {"accent", p.accent},
           {"face_alpha", p.face_alpha},
           {"transfer_function", to_json(p.tf)},
           {"background", to_string(p.background)},
           {"halo_width", p.halo_width},
           {"halo_offset", p.halo_offset},
           {"desaturation", p.desaturation},
           {"silhouettes", p.silhouettes},
           {"silhouette_threshold", p.silhouette_threshold},
           {"fragment_capacity", p.fragment_capacity},
           {"threads", p.threads},
           {"tile_size", p.tile_size}};
    if (p.camera)
        j["camera"] = {{"eye", to_json(p.camera->eye)},
                       {"target", to_json(p.camera->target)},
                       {"up", to_json(p.camera->up)},
                       {"fov_y_deg", p.camera->fov_y_deg}};
    else
        j["camera"] = nullptr;
    // a point is derived output; drop it so the document re-applies cleanly
    json lens = to_json(state.lens);
    lens.erase("point");
    j["lens"] = lens;
    return j;
}

json to_json(const RenderStats& s) {
    return {{"triangles", s.triangles},
            {"fragments", s.fragments},
            {"max_buffer_fragments", s.max_buffer_fragments},
            {"tiles", s.tiles},
            {"threads", s.threads},
            {"lod", s.lod},
            {"setup_ms", s.setup_ms},
            {"shade_ms", s.shade_ms},
            {"composite_ms", s.composite_ms},
            {"silhouette_ms", s.silhouette_ms},
            {"total_ms", s.total_ms}};
}

}  // namespace hexlens
