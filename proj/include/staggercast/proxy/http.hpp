#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace staggercast::proxy {

/// Header list with case-insensitive lookup; order and duplicates are kept.
class Headers {
public:
    Headers() = default;
    Headers(std::initializer_list<std::pair<std::string, std::string>> items) : items_(items) {}

    std::optional<std::string> get(std::string_view name) const;
    void set(std::string name, std::string value);  // replaces every existing value
    void add(std::string name, std::string value);
    void erase(std::string_view name);
    bool contains(std::string_view name) const { return get(name).has_value(); }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

bool iequals(std::string_view a, std::string_view b);

struct HttpRequest {
    std::string method = "GET";
    /// Request target as sent: absolute-form (`http://host/path?q`) or origin-form (`/path?q`).
    std::string target = "/";
    Headers headers;
    std::string body;
    std::string remote_addr;
};

struct HttpResponse {
    int status = 200;
    Headers headers;
    std::string body;
};

struct Url {
    std::string scheme = "http";
    std::string host;  // lowercased
    int port = 80;
    std::string path = "/";
    std::string query;  // raw, without '?'

    /// `path[?query]`.
    std::string path_and_query() const;
    /// `scheme://host[:port]path[?query]`, port omitted when default.
    std::string str() const;
    std::string authority() const;
};

/// Plain-http absolute URL; empty on anything else.
std::optional<Url> parse_url(std::string_view text);

/// Resolves the effective URL of a proxied request from its target and Host header.
std::optional<Url> request_url(const HttpRequest& request);

/// Decoded query or form parameters; later duplicates are ignored.
std::map<std::string, std::string> parse_params(std::string_view text);
std::string encode_param(std::string_view value);

/// Removes every `name=...` pair from a raw query string, leaving the rest byte-identical.
/// Returns the removed value (still encoded) of the first occurrence.
std::optional<std::string> take_query_param(std::string& query, std::string_view name);

HttpResponse text_response(int status, std::string body, std::string content_type = "text/plain; charset=utf-8");
HttpResponse redirect_response(const std::string& location);

bool is_hop_by_hop(std::string_view header);

}  // namespace staggercast::proxy
