#include <condition_variable>
#include <deque>
#include <iostream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hexlens/service.hpp"

namespace hexlens {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

/// Live connection that stop() can close once the io threads have joined.
struct Closable {
    virtual ~Closable() = default;
    virtual void force_close() = 0;
};

struct Server::Impl {
    explicit Impl(ServiceConfig cfg)
        : config(cfg), api(cfg), acceptor(net::make_strand(ioc)), pool(std::max(1, cfg.worker_threads)) {}

    void log(const std::string& what) const {
        if (!config.quiet) std::clog << "hexlens-serve: " << what << std::endl;
    }

    ServiceConfig config;
    Api api;
    net::io_context ioc;
    tcp::acceptor acceptor;
    net::thread_pool pool;
    std::vector<std::thread> threads;
    unsigned short port = 0;
    bool running = false;
    std::mutex mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;
    std::mutex connections_mutex;
    std::vector<std::weak_ptr<Closable>> connections;

    void track(const std::shared_ptr<Closable>& c) {
        std::lock_guard lock(connections_mutex);
        std::erase_if(connections, [](const auto& w) { return w.expired(); });
        connections.push_back(c);
    }

    void do_accept();
};

namespace {

/// "/sessions/{id}/stream" -> id, otherwise empty.
std::string stream_session_id(std::string_view target) {
    target = target.substr(0, target.find('?'));
    constexpr std::string_view prefix = "/sessions/", suffix = "/stream";
    if (target.size() <= prefix.size() + suffix.size() || target.substr(0, prefix.size()) != prefix ||
        target.substr(target.size() - suffix.size()) != suffix)
        return {};
    std::string_view id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
    if (id.find('/') != std::string_view::npos) return {};
    return std::string(id);
}

class StreamConnection : public Closable, public std::enable_shared_from_this<StreamConnection> {
public:
    void force_close() override {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

    StreamConnection(tcp::socket&& socket, Server::Impl& server, std::shared_ptr<Session> session)
        : ws_(std::move(socket)), server_(server), session_(std::move(session)) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(std::size_t{1} << 20);
        ws_.async_accept(req, beast::bind_front_handler(&StreamConnection::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return server_.log("websocket accept: " + ec.message());
        json hello = session_->summary();
        hello["type"] = "hello";
        hello["state"] = to_json(session_->snapshot());
        send(false, hello.dump());
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&StreamConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            if (ec != websocket::error::closed && ec != net::error::eof && ec != net::error::operation_aborted)
                server_.log("websocket read: " + ec.message());
            return;
        }
        std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (!ws_.got_text()) {
            send_error(400, "stream messages must be JSON text");
        } else {
            try {
                pending_ = server_.api.apply_stream_message(*session_, text);
                maybe_render();
            } catch (const ApiError& e) {
                server_.log("stream message rejected: " + std::string(e.what()));
                send_error(e.status(), e.what(), e.detail());
            }
        }
        do_read();
    }

    // Runs on the connection strand. Deltas arriving during a render only
    // overwrite `pending_`, so skipped frame ids are never rendered.
    void maybe_render() {
        if (rendering_ || !pending_ || closed_) return;
        rendering_ = true;
        std::uint64_t id = *pending_;
        pending_.reset();
        net::post(server_.pool, [self = shared_from_this(), id] {
            std::optional<Frame> frame;
            std::optional<ApiError> error;
            try {
                frame = self->server_.api.render(*self->session_, id);
            } catch (const ApiError& e) {
                error = e;
            } catch (const std::exception& e) {
                error = ApiError(500, e.what());
            }
            net::post(self->ws_.get_executor(), [self, frame = std::move(frame), error = std::move(error), id] {
                self->rendering_ = false;
                if (frame) {
                    self->send(false, frame->metadata().dump());
                    self->send(true, encode_frame_message(frame->id, frame->png));
                } else {
                    json detail = error->detail();
                    detail["frame_id"] = id;
                    self->send_error(error->status(), error->what(), detail);
                }
                self->maybe_render();
            });
        });
    }

    void send_error(int status, const std::string& message, const json& detail = json::object()) {
        json body = detail.is_object() ? detail : json::object();
        body["type"] = "error";
        body["status"] = status;
        body["error"] = message;
        send(false, body.dump());
    }

    void send(bool binary, std::string payload) {
        if (closed_) return;
        queue_.emplace_back(binary, std::move(payload));
        if (queue_.size() == 1) do_write();
    }

    void do_write() {
        ws_.binary(queue_.front().first);
        ws_.async_write(net::buffer(queue_.front().second),
                        beast::bind_front_handler(&StreamConnection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            queue_.clear();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) do_write();
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    Server::Impl& server_;
    std::shared_ptr<Session> session_;
    std::deque<std::pair<bool, std::string>> queue_;
    std::optional<std::uint64_t> pending_;
    bool rendering_ = false;
    bool closed_ = false;
};

class HttpConnection : public Closable, public std::enable_shared_from_this<HttpConnection> {
public:
    void force_close() override {
        beast::error_code ec;
        stream_.socket().close(ec);
    }

    HttpConnection(tcp::socket&& socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
    }

private:
    void do_read() {
        parser_.emplace();
        parser_->body_limit(server_.config.max_upload_bytes);
        stream_.expires_after(std::chrono::seconds(300));
        http::async_read(stream_, buffer_, *parser_,
                         beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec == http::error::end_of_stream) return close();
        if (ec == http::error::body_limit) {
            ApiResponse r = error_response(413, "request body exceeds the upload cap",
                                           {{"limit", server_.config.max_upload_bytes}});
            return write(std::move(r), 11, false);
        }
        if (ec) return;
        http::request<http::string_body> req = parser_->release();
        if (websocket::is_upgrade(req)) {
            std::string id = stream_session_id(std::string_view(req.target().data(), req.target().size()));
            auto session = id.empty() ? nullptr : server_.api.find(id);
            if (session) {
                stream_.expires_never();
                auto conn = std::make_shared<StreamConnection>(stream_.release_socket(), server_, session);
                server_.track(conn);
                conn->run(std::move(req));
                return;
            }
            return write(error_response(404, id.empty() ? "no such stream route" : "unknown session '" + id + "'"),
                         req.version(), false);
        }
        ApiRequest request{std::string(req.method_string()), std::string(req.target()), std::move(req.body()),
                           std::string(req[http::field::content_type])};
        unsigned version = req.version();
        bool keep_alive = req.keep_alive();
        net::post(server_.pool, [self = shared_from_this(), request = std::move(request), version, keep_alive] {
            ApiResponse r = self->server_.api.handle(request);
            if (r.status >= 400) self->server_.log(request.method + " " + request.target + " -> " +
                                                   std::to_string(r.status) + " " + r.body);
            net::post(self->stream_.get_executor(), [self, r = std::move(r), version, keep_alive]() mutable {
                self->write(std::move(r), version, keep_alive);
            });
        });
    }

    void write(ApiResponse r, unsigned version, bool keep_alive) {
        auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status), version);
        res->set(http::field::server, "hexlens");
        res->set(http::field::content_type, r.content_type);
        res->set(http::field::access_control_allow_origin, "*");
        for (const auto& [k, v] : r.headers) res->set(k, v);
        res->body() = std::move(r.body);
        res->keep_alive(keep_alive);
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec || !res->keep_alive()) return self->close();
            self->do_read();
        });
    }

    void close() {
        beast::error_code ec;
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    Server::Impl& server_;
};

}  // namespace

void Server::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != net::error::operation_aborted) log("accept: " + ec.message());
            if (!acceptor.is_open()) return;
        } else {
            auto conn = std::make_shared<HttpConnection>(std::move(socket), *this);
            track(conn);
            conn->run();
        }
        do_accept();
    });
}

Server::Server(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() { stop(); }

Api& Server::api() { return impl_->api; }

unsigned short Server::port() const { return impl_->port; }

unsigned short Server::start() {
    Impl& s = *impl_;
    auto endpoint = tcp::endpoint(net::ip::make_address(s.config.address), s.config.port);
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen(net::socket_base::max_listen_connections);
    s.port = s.acceptor.local_endpoint().port();
    s.do_accept();
    s.running = true;
    for (int i = 0; i < std::max(1, s.config.io_threads); ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
    return s.port;
}

void Server::stop() {
    Impl& s = *impl_;
    if (s.running) {
        s.ioc.stop();
        for (auto& t : s.threads) t.join();
        s.threads.clear();
        beast::error_code ec;
        s.acceptor.close(ec);
        // no io thread runs now, so closing sockets directly cannot race a handler
        std::vector<std::weak_ptr<Closable>> live;
        {
            std::lock_guard lock(s.connections_mutex);
            live.swap(s.connections);
        }
        for (auto& w : live)
            if (auto c = w.lock()) c->force_close();
        s.pool.join();
        s.running = false;
    }
    std::lock_guard lock(s.mutex);
    s.stopped = true;
    s.stopped_cv.notify_all();
}

void Server::wait() {
    Impl& s = *impl_;
    net::signal_set signals(s.ioc, SIGINT, SIGTERM);
    signals.async_wait([&s](beast::error_code, int) {
        std::lock_guard lock(s.mutex);
        s.stopped = true;
        s.stopped_cv.notify_all();
    });
    std::unique_lock lock(s.mutex);
    s.stopped_cv.wait(lock, [&s] { return s.stopped; });
}

}  // namespace hexlens
