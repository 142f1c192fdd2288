#include "staggercast/proxy/session_store.hpp"

#include "staggercast/proxy/crypto.hpp"

#include <charconv>
#include <cmath>

namespace staggercast::proxy {

std::string SessionStore::create(StagingSession session, double now_s) {
    std::lock_guard lock(mu_);
    std::string token;
    do {
        token = random_token();
    } while (sessions_.count(token));
    session.token = token;
    session.created_s = now_s;
    session.expires_s = now_s + expiry_s_;
    sessions_.emplace(token, std::move(session));
    return token;
}

std::optional<StagingSession> SessionStore::find(const std::string& token, double now_s) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(token);
    if (it == sessions_.end() || now_s >= it->second.expires_s) return std::nullopt;
    return it->second;
}

SessionStore::Resolution SessionStore::resolve(const std::string& token, double now_s,
                                               const std::function<std::string(const StagingSession&)>& check) {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(token);
    if (it == sessions_.end()) return {};
    if (now_s >= it->second.expires_s) {
        sessions_.erase(it);
        return {};
    }
    if (auto error = check(it->second); !error.empty()) return {Outcome::Rejected, std::move(error), std::nullopt};
    Resolution r{Outcome::Resolved, {}, std::move(it->second)};
    sessions_.erase(it);
    return r;
}

std::size_t SessionStore::purge_expired(double now_s) {
    std::lock_guard lock(mu_);
    return std::erase_if(sessions_, [&](const auto& kv) { return now_s >= kv.second.expires_s; });
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

BypassSigner::BypassSigner(std::string key, double ttl_s)
    : key_(key.empty() ? random_bytes(32) : std::move(key)), ttl_s_(ttl_s) {}

std::string BypassSigner::mac(std::string_view expiry, std::string_view nonce, std::string_view url) const {
    std::string msg;
    msg.append(expiry).append(".").append(nonce).append(".").append(url);
    return base64url(hmac_sha256(key_, msg));
}

std::string BypassSigner::mint(const std::string& url, double now_s) {
    const std::string expiry = std::to_string(static_cast<long long>(std::ceil(now_s + ttl_s_)));
    const std::string nonce = base64url(random_bytes(9));
    return expiry + "." + nonce + "." + mac(expiry, nonce, url);
}

bool BypassSigner::redeem(const std::string& url, const std::string& marker, double now_s) {
    const auto d1 = marker.find('.');
    const auto d2 = d1 == std::string::npos ? std::string::npos : marker.find('.', d1 + 1);
    if (d2 == std::string::npos) return false;
    const std::string_view m(marker);
    const auto expiry_text = m.substr(0, d1);
    const auto nonce = m.substr(d1 + 1, d2 - d1 - 1);
    const auto sig = m.substr(d2 + 1);
    long long expiry = 0;
    auto [p, ec] = std::from_chars(expiry_text.data(), expiry_text.data() + expiry_text.size(), expiry);
    if (ec != std::errc{} || p != expiry_text.data() + expiry_text.size()) return false;
    if (!constant_time_equal(sig, mac(expiry_text, nonce, url))) return false;
    if (now_s >= static_cast<double>(expiry)) return false;

    std::lock_guard lock(mu_);
    while (!used_.empty() && used_.begin()->first <= now_s) used_.erase(used_.begin());
    return used_.emplace(static_cast<double>(expiry), std::string(nonce)).second;
}

Url with_bypass(Url url, const std::string& marker) {
    if (!url.query.empty()) url.query += '&';
    url.query += std::string(BypassSigner::kParam) + "=" + marker;
    return url;
}

}  // namespace staggercast::proxy
