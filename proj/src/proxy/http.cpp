#include "staggercast/proxy/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>

namespace staggercast::proxy {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::optional<std::string> Headers::get(std::string_view name) const {
    for (const auto& [k, v] : items_) {
        if (iequals(k, name)) return v;
    }
    return std::nullopt;
}

void Headers::set(std::string name, std::string value) {
    erase(name);
    items_.emplace_back(std::move(name), std::move(value));
}

void Headers::add(std::string name, std::string value) {
    items_.emplace_back(std::move(name), std::move(value));
}

void Headers::erase(std::string_view name) {
    std::erase_if(items_, [&](const auto& kv) { return iequals(kv.first, name); });
}

std::string Url::authority() const {
    const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return default_port ? host : host + ":" + std::to_string(port);
}

std::string Url::path_and_query() const {
    return query.empty() ? path : path + "?" + query;
}

std::string Url::str() const {
    return scheme + "://" + authority() + path_and_query();
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool valid_host(std::string_view host) {
    if (host.empty()) return false;
    return std::all_of(host.begin(), host.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
    });
}

// "host[:port]" into a Url; false when malformed.
bool split_authority(std::string_view authority, Url& url) {
    const auto colon = authority.rfind(':');
    std::string_view host = authority;
    if (colon != std::string_view::npos) {
        host = authority.substr(0, colon);
        const auto port_text = authority.substr(colon + 1);
        int port = 0;
        auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || p != port_text.data() + port_text.size() || port <= 0 || port > 65535) return false;
        url.port = port;
    }
    if (!valid_host(host)) return false;
    url.host = lower(host);
    return true;
}

void split_path(std::string_view rest, Url& url) {
    const auto q = rest.find('?');
    url.path = std::string(rest.substr(0, q));
    if (url.path.empty()) url.path = "/";
    url.query = q == std::string_view::npos ? "" : std::string(rest.substr(q + 1));
}

}  // namespace

std::optional<Url> parse_url(std::string_view text) {
    constexpr std::string_view kScheme = "http://";
    if (text.size() < kScheme.size() || !iequals(text.substr(0, kScheme.size()), kScheme)) return std::nullopt;
    text.remove_prefix(kScheme.size());
    const auto slash = text.find_first_of("/?");
    Url url;
    if (!split_authority(text.substr(0, slash), url)) return std::nullopt;
    split_path(slash == std::string_view::npos ? std::string_view{} : text.substr(slash), url);
    if (url.path.front() != '/') url.path.insert(url.path.begin(), '/');
    return url;
}

std::optional<Url> request_url(const HttpRequest& request) {
    if (!request.target.empty() && request.target.front() == '/') {
        const auto host = request.headers.get("Host");
        if (!host) return std::nullopt;
        Url url;
        if (!split_authority(*host, url)) return std::nullopt;
        split_path(request.target, url);
        return url;
    }
    return parse_url(request.target);
}

std::map<std::string, std::string> parse_params(std::string_view text) {
    httplib::Params params;
    httplib::detail::parse_query_text(std::string(text), params);
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : params) out.emplace(k, v);
    return out;
}

std::string encode_param(std::string_view value) {
    return httplib::detail::encode_query_param(std::string(value));
}

std::optional<std::string> take_query_param(std::string& query, std::string_view name) {
    std::optional<std::string> found;
    std::vector<std::string_view> kept;
    const std::string_view q(query);
    std::size_t start = 0;
    while (true) {
        const auto amp = q.find('&', start);
        const auto part = q.substr(start, amp == std::string_view::npos ? std::string_view::npos : amp - start);
        const auto eq = part.find('=');
        if (part.substr(0, eq) == name) {
            if (!found) found = std::string(eq == std::string_view::npos ? std::string_view{} : part.substr(eq + 1));
        } else {
            kept.push_back(part);
        }
        if (amp == std::string_view::npos) break;
        start = amp + 1;
    }
    if (!found) return std::nullopt;
    std::string rebuilt;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) rebuilt += '&';
        rebuilt += kept[i];
    }
    query = std::move(rebuilt);
    return found;
}

HttpResponse text_response(int status, std::string body, std::string content_type) {
    HttpResponse r;
    r.status = status;
    r.headers.set("Content-Type", std::move(content_type));
    r.body = std::move(body);
    return r;
}

HttpResponse redirect_response(const std::string& location) {
    HttpResponse r;
    r.status = 302;
    r.headers.set("Location", location);
    r.headers.set("Cache-Control", "no-store");
    return r;
}

bool is_hop_by_hop(std::string_view h) {
    for (std::string_view name : {"Connection", "Proxy-Connection", "Keep-Alive", "TE", "Trailer",
                                  "Transfer-Encoding", "Upgrade", "Proxy-Authorization", "Proxy-Authenticate"}) {
        if (iequals(h, name)) return true;
    }
    return false;
}

}  // namespace staggercast::proxy
