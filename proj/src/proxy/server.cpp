#include "staggercast/proxy/server.hpp"

#include <httplib.h>

#include <algorithm>

namespace staggercast::proxy {

HttplibUpstream::HttplibUpstream(ConfigSource config, int timeout_ms)
    : config_(std::move(config)), timeout_ms_(timeout_ms) {}

HttpResponse HttplibUpstream::fetch(const HttpRequest& request, const Url& url) {
    std::string host = url.host;
    int port = url.port;
    if (const auto config = config_ ? config_() : nullptr) {
        auto it = config->upstream_overrides.find(url.authority());
        if (it == config->upstream_overrides.end()) it = config->upstream_overrides.find(url.host);
        if (it != config->upstream_overrides.end()) {
            Url dial;
            if (const auto parsed = parse_url("http://" + it->second)) dial = *parsed;
            else throw UpstreamError("bad upstream override '" + it->second + "'");
            host = dial.host;
            port = dial.port;
        }
    }

    httplib::Client client(host, port);
    const auto sec = timeout_ms_ / 1000;
    const auto usec = (timeout_ms_ % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    client.set_decompress(false);
    client.set_follow_location(false);
    client.set_keep_alive(false);

    httplib::Request req;
    req.method = request.method;
    req.path = request.target;
    for (const auto& [k, v] : request.headers) req.headers.emplace(k, v);
    req.body = request.body;

    auto result = client.send(req);
    if (!result) throw UpstreamError(httplib::to_string(result.error()));
    HttpResponse out;
    out.status = result->status;
    for (const auto& [k, v] : result->headers) out.headers.add(k, v);
    out.body = std::move(result->body);
    return out;
}

ProxyServer::ProxyServer(ProxyCore& core, std::size_t workers) : server_(std::make_unique<httplib::Server>()) {
    // Upstream fetches block a worker, and idle keep-alive connections hold one too.
    server_->new_task_queue = [workers] { return new httplib::ThreadPool(std::max<std::size_t>(workers, 1)); };
    server_->set_keep_alive_timeout(1);
    auto handler = [&core](const httplib::Request& req, httplib::Response& res) {
        HttpRequest in;
        in.method = req.method;
        in.target = req.target;
        in.body = req.body;
        in.remote_addr = req.remote_addr;
        for (const auto& [k, v] : req.headers) {
            // Added by httplib, not sent by the client.
            if (k == "REMOTE_ADDR" || k == "REMOTE_PORT" || k == "LOCAL_ADDR" || k == "LOCAL_PORT") continue;
            in.headers.add(k, v);
        }
        auto out = core.handle(in);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.headers.emplace(k, v);
        res.body = std::move(out.body);
    };
    const std::string any = ".*";
    server_->Get(any, handler);
    server_->Post(any, handler);
    server_->Put(any, handler);
    server_->Patch(any, handler);
    server_->Delete(any, handler);
    server_->Options(any, handler);
}

ProxyServer::~ProxyServer() {
    stop();
}

int ProxyServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

bool ProxyServer::listen() {
    return server_->listen_after_bind();
}

void ProxyServer::stop() {
    if (server_->is_running()) server_->stop();
}

bool ProxyServer::running() const {
    return server_->is_running();
}

}  // namespace staggercast::proxy
