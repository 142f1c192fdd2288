#pragma once

#include "staggercast/proxy/proxy_core.hpp"

#include <functional>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace staggercast::proxy {

/// Dials origins with cpp-httplib. Upstream overrides from the current
/// config snapshot redirect the dial target; the Host header is kept.
class HttplibUpstream : public Upstream {
public:
    using ConfigSource = std::function<std::shared_ptr<const ProxyConfig>()>;

    HttplibUpstream(ConfigSource config, int timeout_ms = 10000);
    HttpResponse fetch(const HttpRequest& request, const Url& url) override;

private:
    ConfigSource config_;
    int timeout_ms_;
};

/// Serves a ProxyCore over HTTP, both as a forward proxy (absolute-form
/// targets) and as a gateway (origin-form plus Host).
class ProxyServer {
public:
    explicit ProxyServer(ProxyCore& core, std::size_t workers = 128);
    ~ProxyServer();
    ProxyServer(const ProxyServer&) = delete;
    ProxyServer& operator=(const ProxyServer&) = delete;

    /// Port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();
    bool running() const;

private:
    std::unique_ptr<httplib::Server> server_;
};


}  // namespace staggercast::proxy
