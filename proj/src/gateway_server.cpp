#include "vulnsev/gateway_server.hpp"

#include <sys/socket.h>

#include <charconv>

#include "httplib.h"
#include "vulnsev/error.hpp"

namespace vulnsev {

namespace {

void send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

std::string_view status_code_name(int status) {
    switch (status) {
        case 400: return "bad_request";
        case 404: return "route_not_found";
        case 405: return "method_not_allowed";
        case 408: return "request_timeout";
        case 413: return "payload_too_large";
        case 414: return "uri_too_long";
        case 415: return "unsupported_media_type";
        default: return status >= 500 ? "internal_error" : "request_error";
    }
}

}  // namespace

BindAddress parse_bind_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw ConfigError("bind address '" + std::string(text) + "' lacks ':port'");
    BindAddress b;
    std::string_view host = text.substr(0, colon);
    const std::string_view port = text.substr(colon + 1);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    if (!host.empty()) b.host = std::string(host);
    int value = -1;
    const auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || p != port.data() + port.size() || value < 0 || value > 65535)
        throw ConfigError("bind address '" + std::string(text) + "' has a bad port");
    b.port = value;
    return b;
}

std::string to_string(const BindAddress& b) {
    const bool v6 = b.host.find(':') != std::string::npos;
    return (v6 ? "[" + b.host + "]" : b.host) + ":" + std::to_string(b.port);
}

GatewayServer::GatewayServer(std::shared_ptr<const Gateway> gateway, const BindAddress& bind,
                             std::chrono::milliseconds drain_timeout)
    : gateway_(std::move(gateway)), server_(std::make_unique<httplib::Server>()), host_(bind.host) {
    if (!gateway_) throw ConfigError("gateway server needs a gateway");
    const auto secs = drain_timeout.count() / 1000;
    const auto usecs = (drain_timeout.count() % 1000) * 1000;
    // Read/write timeouts bound how long a stuck connection can hold up shutdown.
    server_->set_read_timeout(secs, usecs);
    server_->set_write_timeout(secs, usecs);
    server_->set_keep_alive_timeout(std::max<long>(1, static_cast<long>(secs)));
    server_->set_payload_max_length(kMaxRequestBodyBytes);
    server_->set_keep_alive_max_count(1000);
    server_->set_tcp_nodelay(true);
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // server share a taken port instead of failing.
    server_->set_socket_options([](int sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    install_routes();

    if (bind.port == 0) {
        port_ = server_->bind_to_any_port(bind.host);
        if (port_ < 0) throw ConfigError("cannot bind " + bind.host + ":0");
    } else {
        if (!server_->bind_to_port(bind.host, bind.port))
            throw ConfigError("cannot bind " + to_string(bind) + " (address in use or not available)");
        port_ = bind.port;
    }
}

GatewayServer::~GatewayServer() {
    stop();
    if (thread_.joinable()) thread_.join();
}

void GatewayServer::install_routes() {
    auto gw = gateway_;
    server_->Get("/health", [gw](const httplib::Request&, httplib::Response& res) { send(res, gw->health()); });
    server_->Get("/models", [gw](const httplib::Request&, httplib::Response& res) { send(res, gw->list_models()); });
    server_->Get("/openapi.json",
                 [gw](const httplib::Request&, httplib::Response& res) { send(res, gw->api_description()); });
    server_->Post(R"(/models/([^/]+)/predict)", [gw](const httplib::Request& req, httplib::Response& res) {
        send(res, gw->predict(req.matches[1].str(), req.body));
    });

    server_->set_error_handler([gw](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        if (res.status == 404)
            send(res, gw->route_not_found(req.method, req.path));
        else
            send(res, {res.status, error_body(status_code_name(res.status), httplib::status_message(res.status))});
        return httplib::Server::HandlerResponse::Handled;
    });
    server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unexpected failure";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& ex) {
            what = ex.what();
        } catch (...) {
        }
        send(res, {500, error_body("internal_error", what)});
    });
}

void GatewayServer::start() {
    if (thread_.joinable()) return;
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void GatewayServer::run() { server_->listen_after_bind(); }

void GatewayServer::stop() {
    // listen_after_bind returns after its worker pool has drained.
    if (server_->is_running()) server_->stop();
    if (thread_.joinable() && std::this_thread::get_id() != thread_.get_id()) thread_.join();
}

}  // namespace vulnsev
