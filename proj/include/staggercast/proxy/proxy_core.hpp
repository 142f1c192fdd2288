#pragma once

#include "staggercast/credit_ledger.hpp"
#include "staggercast/json_fields.hpp"
#include "staggercast/policy_engine.hpp"
#include "staggercast/proxy/domain_table.hpp"
#include "staggercast/proxy/http.hpp"
#include "staggercast/proxy/rewrite.hpp"
#include "staggercast/proxy/session_store.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace staggercast::proxy {

struct CachedObject {
    std::string content_id;
    /// Where the cache node serves the object.
    std::string url;
    std::string title;
    Genre genre = Genre::None;
    std::uint64_t size_bytes = 0;
};

struct UserSettings {
    /// Prior consent to silent response rewriting.
    bool consent_rewrite = false;
};

struct ProxyConfig {
    ManagedDomainTable managed_domains;
    /// host[:port] -> host:port actually dialled.
    std::map<std::string, std::string> upstream_overrides;
    /// Catalog order is the ranking used for alternatives.
    std::vector<CachedObject> cache_items;
    std::map<std::string, UserSettings> users;
    EnumMap<Resource, double> link_utilization{};
    PriceSchedule transit_price = PriceSchedule::flat(0.0);
    DayWindow off_peak_window{2 * 3600.0, 6 * 3600.0};
    /// Added to epoch seconds to get local wall-clock time.
    double clock_offset_s = 0.0;
    double session_expiry_s = 300.0;
    double bypass_ttl_s = 60.0;
    std::int64_t credits_per_accept = 10;
    RuleSet ruleset;
    RewriteSpec rewrite;
    std::string request_log;
    std::string ui_bundle_dir;

    const CachedObject* cached(std::string_view content_id) const;
};

/// Relative paths (ruleset file, request_log, ui_bundle_dir) resolve against `base_dir`.
ProxyConfig parse_proxy_config(const Json& doc, const std::filesystem::path& base_dir = {});
/// Error paths read `<file>:<json path>`.
ProxyConfig load_proxy_config(const std::filesystem::path& file);

/// `host` + `path`, without the query.
std::string content_id_of(const Url& url);
/// FNV-1a over the user key.
UserId user_id_of(std::string_view key);

struct UpstreamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fetches a request from its origin; throws UpstreamError when unreachable.
class Upstream {
public:
    virtual ~Upstream() = default;
    virtual HttpResponse fetch(const HttpRequest& request, const Url& url) = 0;
};

/// Per-user prompt counters and credit balances. Every operation holds one
/// lock, so a cap check and its increment can never interleave.
class UserStateStore {
public:
    /// Resets the user's prompt counter when `day` changed, fills the
    /// history into `ctx` and evaluates.
    EnactmentDecision decide(UserId user, std::int64_t day, std::span<const Rule> ruleset, const Request& request,
                             DecisionContext ctx);
    void record_accept(UserId user, std::int64_t credits, std::string reason, double now_s);
    void record_decline(UserId user);

    UserHistory history(UserId user) const;
    std::int64_t balance(UserId user) const;
    std::int64_t total_issued() const;

private:
    struct State {
        std::int64_t day = 0;
        UserHistory history;
    };
    mutable std::mutex mu_;
    std::map<UserId, State> states_;
    CreditLedger ledger_;
};

struct PrefetchJob {
    UserId user = 0;
    std::string url;
    std::string content_id;
    std::uint64_t size_bytes = 0;
    double new_access_s = 0.0;
};

class ProxyCore {
public:
    using Clock = std::function<double()>;
    using LogSink = std::function<void(const std::string& line)>;

    ProxyCore(std::shared_ptr<const ProxyConfig> config, std::shared_ptr<Upstream> upstream, Clock clock = {});

    /// Thread-safe.
    HttpResponse handle(const HttpRequest& request);

    /// Swaps in a new config snapshot; requests in flight finish on the old one.
    void reload(std::shared_ptr<const ProxyConfig> config);
    std::shared_ptr<const ProxyConfig> config() const;

    void set_log_sink(LogSink sink) { log_sink_ = std::move(sink); }

    SessionStore& sessions() { return sessions_; }
    UserStateStore& users() { return users_; }
    BypassSigner& bypass() { return bypass_; }
    std::vector<PrefetchJob> prefetch_jobs() const;

    static constexpr std::string_view kControlPrefix = "/staggercast/";
    static constexpr std::string_view kUserHeader = "X-Staggercast-User";

private:
    struct LogRecord {
        std::string user;
        std::string domain;
        std::string decision;
        std::string choice;
    };

    HttpResponse dispatch(const HttpRequest& request, LogRecord& log);
    HttpResponse control(const HttpRequest& request, const Url& url, const ProxyConfig& config, LogRecord& log);
    HttpResponse offer_endpoint(const std::string& token, const ProxyConfig& config);
    HttpResponse choice_endpoint(const HttpRequest& request, const ProxyConfig& config, LogRecord& log);
    HttpResponse ui_asset(const std::string& name, const ProxyConfig& config);
    HttpResponse forward(const HttpRequest& request, const Url& url);
    HttpResponse stage(const HttpRequest& request, const Url& url, const ProxyConfig& config, const StageAction& action,
                       const ManagedDomain& domain, const std::string& user_name, UserId user, double now);
    Json offer_json(const StagingSession& session, const ProxyConfig& config, double now) const;

    mutable std::mutex config_mu_;
    std::shared_ptr<const ProxyConfig> config_;
    std::shared_ptr<Upstream> upstream_;
    Clock clock_;
    LogSink log_sink_;
    SessionStore sessions_;
    BypassSigner bypass_;
    UserStateStore users_;
    mutable std::mutex jobs_mu_;
    std::vector<PrefetchJob> jobs_;
};

}  // namespace staggercast::proxy
