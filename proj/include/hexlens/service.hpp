#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hexlens/params_json.hpp"
#include "hexlens/render.hpp"

namespace hexlens {

/// One loaded mesh and its mutable view state. The scene is built once and
/// never mutated; state updates go through `apply` and renders take a
/// consistent copy via `snapshot`.
class Session {
public:
    Session(std::string id, std::shared_ptr<const Scene> scene, std::string metric);

    const std::string& id() const { return id_; }
    const Scene& scene() const { return *scene_; }
    const std::string& metric() const { return metric_; }

    ViewState snapshot() const;
    /// Atomic: either the whole delta applies or ParamsError is thrown and
    /// nothing changes. Returns the resulting state.
    ViewState apply(const json& delta);
    ViewState set_transfer_function(const TransferFunction& tf);
    void set_lens(const LensState& lens);

    /// Serializes renders of this session (at most one in flight).
    std::mutex& render_mutex() { return render_mutex_; }

    std::uint64_t last_frame_id() const { return last_frame_.load(); }
    /// Next server-assigned frame id, strictly above every id seen so far.
    std::uint64_t next_frame_id();
    void note_frame_id(std::uint64_t id);

    json summary() const;

private:
    std::string id_;
    std::shared_ptr<const Scene> scene_;
    std::string metric_;
    mutable std::mutex state_mutex_;
    ViewState state_;
    std::mutex render_mutex_;
    std::atomic<std::uint64_t> last_frame_{0};
};

/// Reason a request failed; maps onto an HTTP status.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, const std::string& what, json detail = json::object())
        : std::runtime_error(what), status_(status), detail_(std::move(detail)) {}
    int status() const { return status_; }
    const json& detail() const { return detail_; }

private:
    int status_;
    json detail_;
};

struct ServiceConfig {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;          // 0 picks a free port
    std::size_t max_upload_bytes = std::size_t{512} << 20;
    int io_threads = 1;
    int worker_threads = 2;              // request handling and rendering
    bool allow_path_reference = true;    // POST /sessions {"path": ...}
    bool quiet = false;                  // suppress the stderr error log
};

struct ApiRequest {
    std::string method;
    std::string target;  // path plus optional query
    std::string body;
    std::string content_type;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
};

/// A rendered frame plus its metadata message.
struct Frame {
    std::uint64_t id = 0;
    std::string png;
    RenderStats stats;
    ViewState state;

    /// Metadata text message sent before the binary payload on the stream.
    json metadata() const;
};

/// 16-byte binary frame header: frame id then payload length, both u64
/// little endian, followed by the PNG bytes.
std::string encode_frame_message(std::uint64_t frame_id, const std::string& png);
/// Returns false for messages shorter than the header or whose length field
/// disagrees with the payload.
bool decode_frame_message(const std::string& message, std::uint64_t& frame_id, std::string& png);

/// Transport-independent request handling shared by the HTTP server and tests.
class Api {
public:
    explicit Api(ServiceConfig config = {});

    ApiResponse handle(const ApiRequest& request);

    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<Session> create(const MeshFile& file, const std::string& metric);
    bool erase(const std::string& id);
    std::size_t size() const;

    /// Renders the session's current state under its render mutex.
    /// Capacity overflow becomes ApiError 507 with the required count.
    Frame render(Session& session, std::uint64_t frame_id);

    /// Applies a stream message ({"id": n, "delta": {...}, "pick": {...}})
    /// and returns the frame id it asks for. Throws ApiError 400.
    std::uint64_t apply_stream_message(Session& session, const std::string& text);

    const ServiceConfig& config() const { return config_; }

private:
    ApiResponse create_session(const ApiRequest& request);
    ApiResponse route_session(const ApiRequest& request, const std::shared_ptr<Session>& session,
                              const std::string& rest);

    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// JSON error body {"error": ..., "status": ..., ...detail}.
ApiResponse error_response(int status, const std::string& message, const json& detail = json::object());

/// Boost.Beast HTTP/WebSocket server around an Api.
class Server {
public:
    explicit Server(ServiceConfig config = {});
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts serving on background threads. Returns the port.
    unsigned short start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal.
    void wait();

    Api& api();
    unsigned short port() const;

    struct Impl;  // transport internals, defined in server.cpp

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace hexlens
