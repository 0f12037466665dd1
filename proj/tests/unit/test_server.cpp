#include <chrono>
#include <string>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "hexlens/service.hpp"

using namespace hexlens;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

struct Reply {
    int status = 0;
    std::string body;
    std::string content_type;
    std::string frame_id;
};

Reply request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "",
              const std::string& type = "application/json") {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "localhost");
    req.set(http::field::content_type, type);
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response_parser<http::string_body> parser;
    parser.body_limit(std::size_t{64} << 20);
    http::read(stream, buf, parser);
    auto res = parser.release();
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), res.body(), std::string(res[http::field::content_type]),
            std::string(res["X-Frame-Id"])};
}

struct Stream {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    Stream(unsigned short port, const std::string& target) {
        ws.next_layer().connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
        ws.read_message_max(std::size_t{64} << 20);
        ws.handshake("localhost", target);
    }
    void send(const std::string& text, bool binary = false) {
        ws.binary(binary);
        ws.write(net::buffer(text));
    }
    // Next message; `binary` reports its type.
    std::string read(bool& binary) {
        beast::flat_buffer buf;
        ws.read(buf);
        binary = ws.got_binary();
        return beast::buffers_to_string(buf.data());
    }
    json read_json() {
        bool binary = false;
        std::string s = read(binary);
        REQUIRE_FALSE(binary);
        return json::parse(s);
    }
    // Reads a metadata message and its binary frame; returns the frame id.
    std::uint64_t read_frame(json* meta_out = nullptr) {
        json meta = read_json();
        REQUIRE(meta["type"] == "frame");
        bool binary = false;
        std::string msg = read(binary);
        REQUIRE(binary);
        std::uint64_t id = 0;
        std::string png;
        REQUIRE(decode_frame_message(msg, id, png));
        CHECK(id == meta["frame_id"].get<std::uint64_t>());
        CHECK(png.size() == meta["bytes"].get<std::size_t>());
        CHECK(png.compare(0, 4, "\x89PNG") == 0);
        if (meta_out) *meta_out = meta;
        return id;
    }
    ~Stream() {
        beast::error_code ec;
        ws.close(websocket::close_code::normal, ec);
    }
};

ServiceConfig test_config() {
    ServiceConfig c;
    c.port = 0;
    c.quiet = true;
    c.max_upload_bytes = 4096;
    return c;
}

}  // namespace

TEST_CASE("http round trip") {
    Server server(test_config());
    unsigned short port = server.start();
    REQUIRE(port != 0);

    Reply h = request(port, http::verb::get, "/health");
    CHECK(h.status == 200);
    CHECK(json::parse(h.body)["status"] == "ok");

    Reply created = request(port, http::verb::post, "/sessions", R"({"generate": "cube"})");
    REQUIRE(created.status == 201);
    json s = json::parse(created.body);
    CHECK(s["cells"] == 1);
    std::string id = s["id"];

    Reply png = request(port, http::verb::post, "/sessions/" + id + "/render", R"({"width": 64, "height": 48})");
    CHECK(png.status == 200);
    CHECK(png.content_type == "image/png");
    CHECK(png.frame_id == "1");

    CHECK(request(port, http::verb::get, "/sessions/nope").status == 404);
    CHECK(request(port, http::verb::post, "/sessions", "{oops").status == 400);
    Reply big = request(port, http::verb::post, "/sessions", std::string(10000, 'x'), "application/octet-stream");
    CHECK(big.status == 413);
    // the server survives an oversized upload
    CHECK(request(port, http::verb::get, "/health").status == 200);
    server.stop();
}

TEST_CASE("stream frames, latest-wins and malformed input") {
    Server server(test_config());
    unsigned short port = server.start();
    Reply created = request(port, http::verb::post, "/sessions", R"({"generate": "demo"})");
    REQUIRE(created.status == 201);
    std::string id = json::parse(created.body)["id"];

    Stream st(port, "/sessions/" + id + "/stream");
    json hello = st.read_json();
    CHECK(hello["type"] == "hello");
    CHECK(hello["id"] == id);
    CHECK(hello["state"].is_object());

    SUBCASE("one delta, one frame") {
        st.send(R"({"id": 1, "delta": {"width": 64, "height": 48}})");
        json meta;
        CHECK(st.read_frame(&meta) == 1);
        CHECK(meta["width"] == 64);
        CHECK(meta["timings"].contains("total_ms"));
    }
    SUBCASE("ten rapid deltas: the last one always renders") {
        // large enough that the first render is still running when the rest arrive
        st.send(R"({"id": 1, "delta": {"width": 1280, "height": 720}})");
        for (int i = 2; i <= 10; ++i)
            st.send(json{{"id", i}, {"delta", {{"accent", 1.0 + 0.1 * i}}}}.dump());
        std::vector<std::uint64_t> ids;
        while (ids.empty() || ids.back() != 10) ids.push_back(st.read_frame());
        CHECK(ids.front() == 1);
        CHECK(ids.size() < 10);
        for (std::size_t i = 1; i < ids.size(); ++i) CHECK(ids[i] > ids[i - 1]);
        // state reflects the last delta
        Reply params = request(port, http::verb::get, "/sessions/" + id + "/params");
        CHECK(json::parse(params.body)["accent"].get<double>() == doctest::Approx(2.0));
    }
    SUBCASE("malformed messages get errors and the stream survives") {
        st.send("{not json");
        json e1 = st.read_json();
        CHECK(e1["type"] == "error");
        CHECK(e1["status"] == 400);
        st.send(std::string("\x01\x02\x03", 3), true);
        json e2 = st.read_json();
        CHECK(e2["status"] == 400);
        st.send(R"({"delta": {"face_alpha": 5}})");
        CHECK(st.read_json()["status"] == 400);
        st.send(R"({"id": 3, "delta": {"width": 32, "height": 32}})");
        CHECK(st.read_frame() == 3);
    }
    SUBCASE("render errors arrive as messages") {
        st.send(R"({"id": 4, "delta": {"width": 64, "height": 48, "fragment_capacity": 5}})");
        json e = st.read_json();
        CHECK(e["type"] == "error");
        CHECK(e["status"] == 507);
        CHECK(e["frame_id"] == 4);
        CHECK(e["required"].get<std::size_t>() > 5);
    }
    // `st` closes before `server` stops: declaration order
}

TEST_CASE("stream to an unknown session is refused") {
    Server server(test_config());
    unsigned short port = server.start();
    CHECK_THROWS(Stream(port, "/sessions/s404/stream"));
    CHECK_THROWS(Stream(port, "/elsewhere"));
    server.stop();
}

TEST_CASE("stop closes connections that are still open") {
    Server server(test_config());
    unsigned short port = server.start();
    Reply created = request(port, http::verb::post, "/sessions", R"({"generate": "cube"})");
    std::string id = json::parse(created.body)["id"];

    Stream st(port, "/sessions/" + id + "/stream");
    CHECK(st.read_json()["type"] == "hello");
    // an idle HTTP keep-alive connection as well
    net::io_context ioc;
    tcp::socket idle(ioc);
    idle.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));

    auto t0 = std::chrono::steady_clock::now();
    server.stop();
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));

    bool binary = false;
    CHECK_THROWS(st.read(binary));
    char byte = 0;
    beast::error_code ec;
    idle.read_some(net::buffer(&byte, 1), ec);
    CHECK(ec);
}
