#pragma once

#include "staggercast/policy_engine.hpp"
#include "staggercast/proxy/http.hpp"
#include "staggercast/user_agents.hpp"

#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace staggercast::proxy {

struct Alternative {
    std::string content_id;
    std::string title;
    Genre genre = Genre::None;
    std::string url;
    bool cached = true;
};

/// One pending staging interaction.
struct StagingSession {
    std::string token;
    std::string method;
    Url original_url;
    Headers original_headers;
    IncentiveOffer offer;
    EnumSet<ChoiceKind> options;
    std::vector<Alternative> alternatives;
    std::optional<TimeRange> delay_window;  // epoch seconds
    UserId user = 0;
    std::string user_name;
    std::string domain;
    std::string content_id;
    std::uint64_t size_bytes = 0;
    double transit_utilization = 0.0;
    double created_s = 0.0;
    double expires_s = 0.0;
};

/// Token-keyed sessions. Every operation is linearizable under one mutex;
/// a session moves Pending -> Resolved exactly once and is then unreachable.
class SessionStore {
public:
    explicit SessionStore(double expiry_s = 300.0) : expiry_s_(expiry_s) {}

    /// Assigns a fresh token and timestamps; returns the token.
    std::string create(StagingSession session, double now_s);
    /// Pending and unexpired only.
    std::optional<StagingSession> find(const std::string& token, double now_s) const;

    enum class Outcome { Resolved, Gone, Rejected };
    struct Resolution {
        Outcome outcome = Outcome::Gone;
        std::string error;                       // Rejected only
        std::optional<StagingSession> session;   // Resolved only
    };
    /// Runs `check` on the pending session under the lock. A non-empty error
    /// rejects the choice and leaves the session pending; otherwise the
    /// session is resolved and removed.
    Resolution resolve(const std::string& token, double now_s,
                       const std::function<std::string(const StagingSession&)>& check);

    std::size_t purge_expired(double now_s);
    std::size_t size() const;
    double expiry_s() const { return expiry_s_; }

private:
    double expiry_s_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, StagingSession> sessions_;
};

/// Signed, short-lived, single-use marker letting one request skip DSM.
/// Format: `<expiry>.<nonce>.<mac>`, MAC = HMAC-SHA256 over expiry, nonce and URL.
class BypassSigner {
public:
    /// An empty key draws a random one.
    explicit BypassSigner(std::string key = {}, double ttl_s = 60.0);

    std::string mint(const std::string& url, double now_s);
    /// True once per valid, unexpired marker for exactly this URL.
    bool redeem(const std::string& url, const std::string& marker, double now_s);

    static constexpr std::string_view kParam = "sc_bypass";

private:
    std::string mac(std::string_view expiry, std::string_view nonce, std::string_view url) const;

    std::string key_;
    double ttl_s_;
    std::mutex mu_;
    std::set<std::pair<double, std::string>> used_;  // (expiry, nonce)
};

/// Appends the marker as a query parameter.
Url with_bypass(Url url, const std::string& marker);

}  // namespace staggercast::proxy
