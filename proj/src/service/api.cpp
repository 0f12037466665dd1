#include "hexlens/service.hpp"

#include <charconv>
#include <sstream>

#include "hexlens/generators.hpp"

namespace hexlens {

namespace {

struct Target {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

std::string url_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int v = 0;
            auto r = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
            if (r.ec == std::errc{} && r.ptr == s.data() + i + 3) {
                out.push_back(static_cast<char>(v));
                i += 2;
                continue;
            }
        }
        out.push_back(s[i] == '+' ? ' ' : s[i]);
    }
    return out;
}

Target parse_target(std::string_view target) {
    Target t;
    auto q = target.find('?');
    std::string_view path = target.substr(0, q);
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto next = path.find('/', pos);
        if (next == std::string_view::npos) next = path.size();
        if (next > pos) t.segments.push_back(url_decode(path.substr(pos, next - pos)));
        pos = next + 1;
    }
    if (q != std::string_view::npos) {
        std::string_view qs = target.substr(q + 1);
        std::size_t p = 0;
        while (p < qs.size()) {
            auto amp = qs.find('&', p);
            if (amp == std::string_view::npos) amp = qs.size();
            auto kv = qs.substr(p, amp - p);
            auto eq = kv.find('=');
            if (eq == std::string_view::npos) t.query[url_decode(kv)] = "";
            else t.query[url_decode(kv.substr(0, eq))] = url_decode(kv.substr(eq + 1));
            p = amp + 1;
        }
    }
    return t;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ApiError(400, std::string("malformed JSON: ") + e.what());
    }
}

ApiResponse json_response(int status, const json& body) {
    ApiResponse r;
    r.status = status;
    r.body = body.dump();
    return r;
}

MeshFormat parse_format(const std::string& name) {
    if (name == "medit" || name == "mesh") return MeshFormat::Medit;
    if (name == "vtk") return MeshFormat::VtkLegacy;
    throw ApiError(400, "unknown mesh format '" + name + "' (expected medit or vtk)");
}

MeshFormat sniff_format(const std::string& text) {
    auto start = text.find_first_not_of(" \t\r\n");
    return start != std::string::npos && text.compare(start, 5, "# vtk") == 0 ? MeshFormat::VtkLegacy
                                                                               : MeshFormat::Medit;
}

MeshFile load_text(const std::string& text, MeshFormat format) {
    std::istringstream in(text);
    try {
        return load_mesh(in, format);
    } catch (const MeshParseError& e) {
        throw ApiError(400, e.what(), {{"kind", code(e.kind())}});
    }
}

MeshFile generated(const json& spec) {
    auto as_file = [](HexMesh m) {
        MeshFile f;
        f.mesh = std::move(m);
        return f;
    };
    if (spec == "cube") return as_file(make_grid(1, 1, 1));
    if (spec == "demo") return as_file(make_demo_mesh());
    if (spec.is_object() && spec.contains("grid")) {
        const json& g = spec["grid"];
        if (!g.is_array() || g.size() != 3) throw ApiError(400, "generate.grid must be [n1, n2, n3]");
        std::array<int, 3> n{};
        for (int i = 0; i < 3; ++i) {
            if (!g[i].is_number_integer() || g[i].get<int>() < 1 || g[i].get<int>() > 64)
                throw ApiError(400, "generate.grid entries must be integers in 1..64");
            n[i] = g[i].get<int>();
        }
        return as_file(make_grid(n[0], n[1], n[2]));
    }
    throw ApiError(400, "generate must be \"cube\", \"demo\" or {\"grid\": [n1, n2, n3]}");
}

/// Picks an object lens under {x, y} with world radius `radius`. A miss
/// leaves the lens as it was.
bool apply_pick(Session& session, const json& pick) {
    if (!pick.is_object() || !pick.contains("x") || !pick.contains("y") || !pick.contains("radius") ||
        !pick["x"].is_number() || !pick["y"].is_number() || !pick["radius"].is_number() ||
        !(pick["radius"].get<double>() > 0.0))
        throw ApiError(400, "pick needs numeric x, y and radius > 0");
    for (auto it = pick.begin(); it != pick.end(); ++it)
        if (it.key() != "x" && it.key() != "y" && it.key() != "radius")
            throw ApiError(400, "unknown key '" + it.key() + "' in pick");
    ViewState st = session.snapshot();
    LensState lens = st.lens;
    if (!pick_object_lens(pick["x"].get<double>(), pick["y"].get<double>(), session.scene(), st.params,
                          pick["radius"].get<double>(), lens))
        return false;
    session.set_lens(lens);
    return true;
}

std::uint64_t frame_id_of(const json& v) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ApiError(400, "id must be a non-negative integer");
    return v.get<std::uint64_t>();
}

}  // namespace

// ---------------------------------------------------------------- Session

Session::Session(std::string id, std::shared_ptr<const Scene> scene, std::string metric)
    : id_(std::move(id)), scene_(std::move(scene)), metric_(std::move(metric)) {}

ViewState Session::snapshot() const {
    std::lock_guard lock(state_mutex_);
    return state_;
}

ViewState Session::apply(const json& delta) {
    std::lock_guard lock(state_mutex_);
    apply_json(delta, state_);
    return state_;
}

ViewState Session::set_transfer_function(const TransferFunction& tf) {
    std::lock_guard lock(state_mutex_);
    state_.params.tf = tf;
    return state_;
}

void Session::set_lens(const LensState& lens) {
    std::lock_guard lock(state_mutex_);
    state_.lens = lens;
}

std::uint64_t Session::next_frame_id() {
    std::uint64_t cur = last_frame_.load();
    while (!last_frame_.compare_exchange_weak(cur, cur + 1)) {
    }
    return cur + 1;
}

void Session::note_frame_id(std::uint64_t id) {
    std::uint64_t cur = last_frame_.load();
    while (cur < id && !last_frame_.compare_exchange_weak(cur, id)) {
    }
}

json Session::summary() const {
    const Scene& s = *scene_;
    std::size_t singular = 0, valence1 = 0;
    for (const auto& ev : singular_edges(s.mesh)) {
        ++singular;
        if (ev.kind == EdgeValenceClass::Valence1) ++valence1;
    }
    const LodEdgeStructure& lod = s.lod;
    return {{"id", id_},
            {"metric", metric_},
            {"cells", s.mesh.num_cells()},
            {"vertices", s.mesh.num_vertices()},
            {"edges", s.mesh.num_edges()},
            {"faces", s.mesh.num_faces()},
            {"singular", singular},
            {"singular_valence1", valence1},
            {"non_conforming", s.mesh.non_conforming()},
            {"mesh_buffer_bytes", mesh_buffer_bytes(s.mesh)},
            {"importance", {{"name", s.importance.name}, {"min", s.importance.min}, {"max", s.importance.max}}},
            {"lod",
             {{"level_count", lod.level_count},
              {"sheet_count", s.sheet_count},
              {"initial_components", lod.initial_components},
              {"merges", lod.merges.size()},
              {"build_seconds", lod.build_seconds}}},
            {"ranges",
             {{"lod", {0, lod.level_count - 1}},
              {"delta", {0.0, 1.0}},
              {"accent", {1.0, 4.0}},
              {"face_alpha", {0.0, 1.0}},
              {"w_base", {0.0, s.mean_edge_length}},
              {"default_w_base", 0.15 * s.mean_edge_length},
              {"default_lod", std::max(0, lod.level_count - 2)}}},
            {"last_frame_id", last_frame_id()}};
}

// ---------------------------------------------------------------- frames

json Frame::metadata() const {
    return {{"type", "frame"},
            {"frame_id", id},
            {"width", state.params.width},
            {"height", state.params.height},
            {"encoding", "png"},
            {"bytes", png.size()},
            {"timings",
             {{"shade_ms", stats.shade_ms},
              {"composite_ms", stats.composite_ms},
              {"setup_ms", stats.setup_ms},
              {"silhouette_ms", stats.silhouette_ms},
              {"total_ms", stats.total_ms}}},
            {"stats", to_json(stats)},
            {"state", to_json(state)}};
}

std::string encode_frame_message(std::uint64_t frame_id, const std::string& png) {
    std::string out(16, '\0');
    auto put = [&](std::size_t at, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    };
    put(0, frame_id);
    put(8, png.size());
    return out + png;
}

bool decode_frame_message(const std::string& message, std::uint64_t& frame_id, std::string& png) {
    if (message.size() < 16) return false;
    auto get = [&](std::size_t at) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(message[at + i])) << (8 * i);
        return v;
    };
    std::uint64_t len = get(8);
    if (len != message.size() - 16) return false;
    frame_id = get(0);
    png = message.substr(16);
    return true;
}

ApiResponse error_response(int status, const std::string& message, const json& detail) {
    json body = detail.is_object() ? detail : json::object();
    body["error"] = message;
    body["status"] = status;
    return json_response(status, body);
}

// ---------------------------------------------------------------- Api

Api::Api(ServiceConfig config) : config_(std::move(config)) {}

std::shared_ptr<Session> Api::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<Session> Api::create(const MeshFile& file, const std::string& metric) {
    AttributeField importance;
    try {
        importance = importance_for_metric(file, metric);
    } catch (const std::invalid_argument& e) {
        throw ApiError(400, e.what());
    }
    auto scene = std::make_shared<const Scene>(Scene::build(file.mesh, std::move(importance)));
    std::lock_guard lock(mutex_);
    std::string id = "s" + std::to_string(next_id_++);
    auto session = std::make_shared<Session>(id, std::move(scene), metric);
    sessions_[id] = session;
    return session;
}

bool Api::erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
}

std::size_t Api::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

Frame Api::render(Session& session, std::uint64_t frame_id) {
    std::lock_guard lock(session.render_mutex());
    Frame frame;
    frame.id = frame_id;
    frame.state = session.snapshot();
    try {
        RenderResult r = hexlens::render(session.scene(), frame.state.params, frame.state.lens);
        auto bytes = encode_png(r.image);
        frame.png.assign(bytes.begin(), bytes.end());
        frame.stats = r.stats;
    } catch (const CapacityError& e) {
        throw ApiError(507, e.what(),
                       {{"required", e.required()},
                        {"capacity", e.capacity()},
                        {"hint", "set fragment_capacity to at least " + std::to_string(e.required()) +
                                     " (0 = unbounded)"}});
    }
    session.note_frame_id(frame_id);
    return frame;
}

std::uint64_t Api::apply_stream_message(Session& session, const std::string& text) {
    json msg = parse_body(text);
    if (!msg.is_object()) throw ApiError(400, "stream message must be a JSON object");
    for (auto it = msg.begin(); it != msg.end(); ++it)
        if (it.key() != "id" && it.key() != "delta" && it.key() != "pick")
            throw ApiError(400, "unknown key '" + it.key() + "' in stream message");
    std::uint64_t id = msg.contains("id") ? frame_id_of(msg["id"]) : session.next_frame_id();
    // pick first: a delta in the same message may then adjust the picked lens
    if (msg.contains("pick")) apply_pick(session, msg["pick"]);
    if (msg.contains("delta")) {
        try {
            session.apply(msg["delta"]);
        } catch (const ParamsError& e) {
            throw ApiError(400, e.what());
        }
    }
    return id;
}

ApiResponse Api::handle(const ApiRequest& request) {
    try {
        Target t = parse_target(request.target);
        const auto& seg = t.segments;
        if (seg.size() == 1 && seg[0] == "health") {
            if (request.method != "GET") return error_response(405, "method not allowed");
            return json_response(200, {{"status", "ok"}, {"sessions", size()}});
        }
        if (seg.empty() || seg[0] != "sessions") return error_response(404, "no such route: " + request.target);
        if (seg.size() == 1) {
            if (request.method == "POST") return create_session(request);
            if (request.method == "GET") {
                json ids = json::array();
                std::lock_guard lock(mutex_);
                for (const auto& [id, s] : sessions_) ids.push_back(id);
                return json_response(200, {{"sessions", ids}});
            }
            return error_response(405, "method not allowed");
        }
        auto session = find(seg[1]);
        if (!session) return error_response(404, "unknown session '" + seg[1] + "'");
        std::string rest = seg.size() > 2 ? seg[2] : "";
        if (seg.size() > 3) return error_response(404, "no such route: " + request.target);
        return route_session(request, session, rest);
    } catch (const ApiError& e) {
        return error_response(e.status(), e.what(), e.detail());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

ApiResponse Api::create_session(const ApiRequest& request) {
    Target t = parse_target(request.target);
    std::string metric = t.query.count("metric") ? t.query["metric"] : "scaled-jacobian";
    MeshFile file;
    bool json_body = request.content_type.rfind("application/json", 0) == 0;
    if (json_body) {
        json doc = parse_body(request.body);
        if (!doc.is_object()) throw ApiError(400, "session request must be a JSON object");
        for (auto it = doc.begin(); it != doc.end(); ++it)
            if (it.key() != "path" && it.key() != "generate" && it.key() != "mesh" && it.key() != "format" &&
                it.key() != "metric")
                throw ApiError(400, "unknown key '" + it.key() + "' in session request");
        if (doc.contains("metric")) {
            if (!doc["metric"].is_string()) throw ApiError(400, "metric must be a string");
            metric = doc["metric"];
        }
        int sources = doc.contains("path") + doc.contains("generate") + doc.contains("mesh");
        if (sources != 1) throw ApiError(400, "exactly one of path, generate or mesh is required");
        if (doc.contains("path")) {
            if (!config_.allow_path_reference) throw ApiError(403, "path references are disabled");
            if (!doc["path"].is_string()) throw ApiError(400, "path must be a string");
            std::string path = doc["path"];
            std::error_code ec;
            auto bytes = std::filesystem::file_size(path, ec);
            if (!ec && bytes > config_.max_upload_bytes)
                throw ApiError(413, "mesh exceeds the upload cap", {{"limit", config_.max_upload_bytes}});
            try {
                file = load_mesh_file(path);
            } catch (const MeshParseError& e) {
                throw ApiError(e.kind() == ParseErrorKind::Io ? 404 : 400, e.what(), {{"kind", code(e.kind())}});
            }
        } else if (doc.contains("generate")) {
            file = generated(doc["generate"]);
        } else {
            if (!doc["mesh"].is_string()) throw ApiError(400, "mesh must be a string");
            const std::string& text = doc["mesh"].get_ref<const std::string&>();
            MeshFormat format = sniff_format(text);
            if (doc.contains("format")) {
                if (!doc["format"].is_string()) throw ApiError(400, "format must be a string");
                format = parse_format(doc["format"]);
            }
            file = load_text(text, format);
        }
    } else {
        if (request.body.size() > config_.max_upload_bytes)
            throw ApiError(413, "mesh exceeds the upload cap", {{"limit", config_.max_upload_bytes}});
        MeshFormat format = t.query.count("format") ? parse_format(t.query["format"]) : sniff_format(request.body);
        file = load_text(request.body, format);
    }
    auto session = create(file, metric);
    json body = session->summary();
    body["state"] = to_json(session->snapshot());
    return json_response(201, body);
}

ApiResponse Api::route_session(const ApiRequest& request, const std::shared_ptr<Session>& session,
                               const std::string& rest) {
    const std::string& m = request.method;
    auto not_allowed = [] { return error_response(405, "method not allowed"); };
    if (rest.empty()) {
        if (m == "GET") {
            json body = session->summary();
            body["state"] = to_json(session->snapshot());
            return json_response(200, body);
        }
        if (m == "DELETE") {
            erase(session->id());
            return json_response(200, {{"deleted", session->id()}});
        }
        return not_allowed();
    }
    if (rest == "lod") {
        if (m != "GET") return not_allowed();
        const Scene& s = session->scene();
        json verts = json::array(), edges = json::array(), levels = json::array();
        for (const auto& v : s.mesh.vertices()) verts.push_back({v.x, v.y, v.z});
        for (const auto& e : s.mesh.edges()) edges.push_back({e[0], e[1]});
        for (int L = 0; L < s.lod.level_count; ++L)
            levels.push_back({{"level", L}, {"edges", s.lod.visible_edges(L)}});
        return json_response(200, {{"level_count", s.lod.level_count},
                                   {"vertices", verts},
                                   {"edges", edges},
                                   {"edge_level", s.lod.edge_level},
                                   {"levels", levels}});
    }
    if (rest == "params") {
        if (m == "GET") return json_response(200, to_json(session->snapshot()));
        if (m == "PUT" || m == "PATCH") {
            try {
                return json_response(200, to_json(session->apply(parse_body(request.body))));
            } catch (const ParamsError& e) {
                throw ApiError(400, e.what());
            }
        }
        return not_allowed();
    }
    if (rest == "transfer-function") {
        if (m == "GET") return json_response(200, to_json(session->snapshot().params.tf));
        if (m != "PUT") return not_allowed();
        try {
            TransferFunction tf = transfer_function_from_json(parse_body(request.body));
            return json_response(200, to_json(session->set_transfer_function(tf)));
        } catch (const ParamsError& e) {
            throw ApiError(400, e.what());
        }
    }
    if (rest == "pick") {
        if (m != "POST") return not_allowed();
        bool hit = apply_pick(*session, parse_body(request.body));
        return json_response(200, {{"hit", hit}, {"lens", to_json(session->snapshot().lens)}});
    }
    if (rest == "render") {
        if (m != "POST") return not_allowed();
        json doc = parse_body(request.body);
        if (!doc.is_object()) throw ApiError(400, "render request must be a JSON object");
        std::uint64_t id = doc.contains("id") ? frame_id_of(doc["id"]) : session->next_frame_id();
        doc.erase("id");
        try {
            session->apply(doc);
        } catch (const ParamsError& e) {
            throw ApiError(400, e.what());
        }
        Frame frame = render(*session, id);
        ApiResponse r;
        r.content_type = "image/png";
        r.body = std::move(frame.png);
        r.headers = {{"X-Frame-Id", std::to_string(frame.id)},
                     {"X-Timing-Shade-Ms", std::to_string(frame.stats.shade_ms)},
                     {"X-Timing-Composite-Ms", std::to_string(frame.stats.composite_ms)},
                     {"X-Timing-Total-Ms", std::to_string(frame.stats.total_ms)},
                     {"X-Fragments", std::to_string(frame.stats.fragments)}};
        return r;
    }
    return error_response(404, "no such route: " + request.target);
}

}  // namespace hexlens
