#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "vulnsev/gateway.hpp"

namespace httplib {
class Server;
}

namespace vulnsev {

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
};

// "host:port", "[v6]:port" or ":port".
BindAddress parse_bind_address(std::string_view text);
std::string to_string(const BindAddress& b);

// Any single request body above this is refused with 413 before parsing.
inline constexpr std::size_t kMaxRequestBodyBytes = 1024 * 1024;

class GatewayServer {
public:
    // Binds immediately; a taken port throws ConfigError.
    GatewayServer(std::shared_ptr<const Gateway> gateway, const BindAddress& bind,
                  std::chrono::milliseconds drain_timeout = std::chrono::milliseconds(5000));
    ~GatewayServer();
    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    int port() const noexcept { return port_; }
    const std::string& host() const noexcept { return host_; }

    // Serve on a background thread and return once accepting.
    void start();
    // Serve on the calling thread until stop().
    void run();
    // Stop accepting; in-flight requests finish (bounded by the drain timeout).
    void stop();

private:
    void install_routes();

    std::shared_ptr<const Gateway> gateway_;
    std::unique_ptr<httplib::Server> server_;
    std::string host_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace vulnsev
