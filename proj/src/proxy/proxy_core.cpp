#include "staggercast/proxy/proxy_core.hpp"

#include "staggercast/demand_model.hpp"
#include "staggercast/errors.hpp"
#include "staggercast/user_agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace staggercast::proxy {

// ---------------------------------------------------------------------------
// Configuration

const CachedObject* ProxyConfig::cached(std::string_view content_id) const {
    for (const auto& item : cache_items) {
        if (item.content_id == content_id) return &item;
    }
    return nullptr;
}

namespace {

std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).string();
}

ManagedDomain parse_domain(const Json& v, const std::string& path) {
    JsonObject obj(v, path);
    ManagedDomain d;
    d.app_class = as_enum<AppClass>(obj.required("app_class"), obj.child("app_class"));
    if (const Json* t = obj.optional("tags")) {
        if (!t->is_array()) throw ConfigError(obj.child("tags"), "expected an array");
        for (std::size_t i = 0; i < t->size(); ++i) {
            d.tags.push_back(as_string((*t)[i], obj.child("tags") + "/" + std::to_string(i)));
        }
    }
    if (const Json* g = obj.optional("genre")) d.genre = as_enum<Genre>(*g, obj.child("genre"));
    if (const Json* s = obj.optional("size_hint_bytes")) d.size_hint_bytes = as_uint(*s, obj.child("size_hint_bytes"));
    obj.finish();
    return d;
}

}  // namespace

ProxyConfig parse_proxy_config(const Json& doc, const std::filesystem::path& base_dir) {
    JsonObject obj(doc, "");
    ProxyConfig c;
    {
        const Json& domains = obj.required("managed_domains");
        const auto path = obj.child("managed_domains");
        if (!domains.is_object()) throw ConfigError(path, "expected an object");
        for (const auto& [suffix, entry] : domains.items()) {
            try {
                c.managed_domains.add(suffix, parse_domain(entry, path + "/" + suffix));
            } catch (const PreconditionError& e) {
                throw ConfigError(path + "/" + suffix, e.what());
            }
        }
    }
    if (const Json* v = obj.optional("upstream_overrides")) {
        if (!v->is_object()) throw ConfigError(obj.child("upstream_overrides"), "expected an object");
        for (const auto& [host, target] : v->items()) {
            c.upstream_overrides[host] = as_string(target, obj.child("upstream_overrides") + "/" + host);
        }
    }
    if (const Json* v = obj.optional("cache")) {
        JsonObject cache(*v, obj.child("cache"));
        if (const Json* items = cache.optional("items")) {
            const auto path = cache.child("items");
            if (!items->is_array()) throw ConfigError(path, "expected an array");
            for (std::size_t i = 0; i < items->size(); ++i) {
                const auto ip = path + "/" + std::to_string(i);
                JsonObject item((*items)[i], ip);
                CachedObject o;
                o.content_id = as_string(item.required("content_id"), item.child("content_id"));
                o.url = as_string(item.required("url"), item.child("url"));
                if (!parse_url(o.url)) throw ConfigError(item.child("url"), "expected an http:// URL");
                if (const Json* t = item.optional("title")) o.title = as_string(*t, item.child("title"));
                if (const Json* g = item.optional("genre")) o.genre = as_enum<Genre>(*g, item.child("genre"));
                if (const Json* s = item.optional("size_bytes")) o.size_bytes = as_uint(*s, item.child("size_bytes"));
                item.finish();
                if (c.cached(o.content_id)) throw ConfigError(item.child("content_id"), "duplicate content id");
                c.cache_items.push_back(std::move(o));
            }
        }
        cache.finish();
    }
    if (const Json* v = obj.optional("users")) {
        if (!v->is_object()) throw ConfigError(obj.child("users"), "expected an object");
        for (const auto& [name, entry] : v->items()) {
            JsonObject u(entry, obj.child("users") + "/" + name);
            UserSettings s;
            if (const Json* cr = u.optional("consent_rewrite")) s.consent_rewrite = as_bool(*cr, u.child("consent_rewrite"));
            u.finish();
            c.users[name] = s;
        }
    }
    if (const Json* v = obj.optional("link_utilization")) {
        JsonObject lu(*v, obj.child("link_utilization"));
        for (Resource r : all_values<Resource>()) {
            const std::string name(to_string(r));
            if (const Json* x = lu.optional(name)) c.link_utilization[r] = as_number(*x, lu.child(name));
            if (c.link_utilization[r] < 0.0) throw ConfigError(lu.child(name), "must be >= 0");
        }
        lu.finish();
    }
    if (const Json* v = obj.optional("transit_price")) c.transit_price = parse_price_schedule(*v, obj.child("transit_price"));
    if (const Json* v = obj.optional("off_peak_window")) c.off_peak_window = as_window(*v, obj.child("off_peak_window"));
    if (const Json* v = obj.optional("clock_offset_s")) c.clock_offset_s = as_number(*v, obj.child("clock_offset_s"));
    auto positive = [&](const char* key, double& out) {
        if (const Json* v = obj.optional(key)) {
            out = as_number(*v, obj.child(key));
            if (!(out > 0.0)) throw ConfigError(obj.child(key), "must be > 0");
        }
    };
    positive("session_expiry_s", c.session_expiry_s);
    positive("bypass_ttl_s", c.bypass_ttl_s);
    if (const Json* v = obj.optional("credits_per_accept")) {
        c.credits_per_accept = as_int(*v, obj.child("credits_per_accept"));
        if (c.credits_per_accept <= 0) throw ConfigError(obj.child("credits_per_accept"), "must be > 0");
    }
    if (const Json* v = obj.optional("ruleset")) {
        if (v->is_string()) {
            const auto file = resolve_path(v->get<std::string>(), base_dir);
            try {
                c.ruleset = parse_ruleset(read_json_file(file));
            } catch (const ConfigError& e) {
                if (e.path() == file) throw;
                std::string message = e.what();
                if (!e.path().empty()) message.erase(0, e.path().size() + 2);
                throw ConfigError(file + ":" + e.path(), message);
            }
        } else {
            try {
                c.ruleset = parse_ruleset(*v);
            } catch (const ConfigError& e) {
                std::string message = e.what();
                if (!e.path().empty()) message.erase(0, e.path().size() + 2);
                throw ConfigError(obj.child("ruleset") + e.path(), message);
            }
        }
    }
    if (const Json* v = obj.optional("rewrite_selector")) {
        c.rewrite.selector = as_string(*v, obj.child("rewrite_selector"));
        if (c.rewrite.selector.empty()) throw ConfigError(obj.child("rewrite_selector"), "must not be empty");
    }
    if (const Json* v = obj.optional("request_log")) c.request_log = resolve_path(as_string(*v, obj.child("request_log")), base_dir);
    if (const Json* v = obj.optional("ui_bundle_dir")) {
        c.ui_bundle_dir = resolve_path(as_string(*v, obj.child("ui_bundle_dir")), base_dir);
    }
    obj.finish();
    return c;
}

ProxyConfig load_proxy_config(const std::filesystem::path& file) {
    const Json doc = read_json_file(file);
    try {
        return parse_proxy_config(doc, file.parent_path());
    } catch (const ConfigError& e) {
        if (!e.path().empty() && e.path().front() != '/') throw;
        std::string message = e.what();
        if (!e.path().empty()) message.erase(0, e.path().size() + 2);
        throw ConfigError(file.string() + ":" + (e.path().empty() ? "/" : e.path()), message);
    }
}

std::string content_id_of(const Url& url) {
    return url.host + url.path;
}

UserId user_id_of(std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// User state

EnactmentDecision UserStateStore::decide(UserId user, std::int64_t day, std::span<const Rule> ruleset,
                                         const Request& request, DecisionContext ctx) {
    std::lock_guard lock(mu_);
    auto& s = states_[user];
    if (s.day != day) {
        s.day = day;
        s.history.prompts_today = 0;
    }
    ctx.user_history = s.history;
    ctx.user_history.credits = ledger_.balance(user);
    auto decision = evaluate(ruleset, request, ctx);
    s.history.prompts_today = ctx.user_history.prompts_today;
    return decision;
}

void UserStateStore::record_accept(UserId user, std::int64_t credits, std::string reason, double now_s) {
    std::lock_guard lock(mu_);
    ++states_[user].history.accepts_total;
    if (credits > 0) ledger_.issue_credits(user, credits, std::move(reason), now_s);
}

void UserStateStore::record_decline(UserId user) {
    std::lock_guard lock(mu_);
    ++states_[user].history.declines_total;
}

UserHistory UserStateStore::history(UserId user) const {
    std::lock_guard lock(mu_);
    const auto it = states_.find(user);
    UserHistory h = it == states_.end() ? UserHistory{} : it->second.history;
    h.credits = ledger_.balance(user);
    return h;
}

std::int64_t UserStateStore::balance(UserId user) const {
    std::lock_guard lock(mu_);
    return ledger_.balance(user);
}

std::int64_t UserStateStore::total_issued() const {
    std::lock_guard lock(mu_);
    return ledger_.total_issued();
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

std::string escape_html(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

HttpResponse json_response(int status, const Json& body) {
    auto r = text_response(status, body.dump(), "application/json");
    r.headers.set("Cache-Control", "no-store");
    return r;
}

HttpResponse json_error(int status, std::string message) {
    return json_response(status, Json{{"error", std::move(message)}});
}

bool wants_json(const HttpRequest& request) {
    const auto accept = request.headers.get("Accept").value_or("");
    return accept.find("application/json") != std::string::npos;
}

bool body_is_json(const HttpRequest& request) {
    const auto type = request.headers.get("Content-Type").value_or("");
    return type.find("application/json") != std::string::npos;
}

std::string wall_clock(double epoch_s, double offset_s) {
    const auto tod = static_cast<long long>(std::floor(time_of_day(epoch_s + offset_s)));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", tod / 3600, (tod / 60) % 60);
    return buf;
}

std::int64_t day_index(double now, double offset_s) {
    return static_cast<std::int64_t>(std::floor((now + offset_s) / kSecondsPerDay));
}

/// Delay slots offered in the no-script form: the first whole minute at least
/// a minute away, then every half hour inside the window.
std::vector<double> delay_slots(const TimeRange& window, double now) {
    std::vector<double> out;
    double t = std::ceil(std::max(window.begin, now + 60.0) / 60.0) * 60.0;
    for (; t < window.end && out.size() < 16; t += 1800.0) out.push_back(t);
    return out;
}

std::string content_type_for(const std::string& name) {
    const auto dot = name.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : name.substr(dot + 1);
    if (ext == "js" || ext == "mjs") return "text/javascript";
    if (ext == "css") return "text/css";
    if (ext == "html") return "text/html; charset=utf-8";
    if (ext == "json" || ext == "map") return "application/json";
    if (ext == "svg") return "image/svg+xml";
    if (ext == "png") return "image/png";
    return "application/octet-stream";
}

std::string render_interstitial(const StagingSession& s, const ProxyConfig& config, double now, bool ui_bundle) {
    const std::string token = escape_html(s.token);
    std::ostringstream h;
    h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      << "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n"
      << "<title>Network busy: choose how to continue</title>\n";
    if (ui_bundle) h << "<link rel=\"stylesheet\" href=\"/staggercast/ui/staging.css\">\n";
    h << "</head>\n<body>\n<main id=\"staggercast-staging\" data-token=\"" << token
      << "\" data-offer-url=\"/staggercast/offer/" << token << "\">\n"
      << "<h1>The network is busy right now</h1>\n"
      << "<p class=\"transparency\">Your provider is asking whether you could fetch <code>"
      << escape_html(s.original_url.str()) << "</code> later or watch something already cached nearby. "
      << "Current transit link utilisation: " << static_cast<int>(std::lround(s.transit_utilization * 100.0))
      << "%.</p>\n"
      << "<p class=\"offer\">Offer: <strong class=\"offer-kind\">" << to_string(s.offer.kind)
      << "</strong> (magnitude " << escape_html(format_double(s.offer.magnitude)) << "). This offer expires in "
      << static_cast<long long>(std::max(0.0, std::floor(s.expires_s - now))) << " s.</p>\n"
      << "<form method=\"post\" action=\"/staggercast/choice\">\n"
      << "<input type=\"hidden\" name=\"token\" value=\"" << token << "\">\n"
      << "<fieldset>\n<legend>Your choice</legend>\n"
      << "<p><label><input type=\"radio\" name=\"choice\" value=\"Continue\" checked> Continue now</label></p>\n";
    if (s.options.contains(ChoiceKind::Delay) && s.delay_window) {
        h << "<p><label><input type=\"radio\" name=\"choice\" value=\"Delay\"> Fetch it later, ready by</label>\n"
          << "<select name=\"new_access_s\">\n";
        for (double slot : delay_slots(*s.delay_window, now)) {
            h << "<option value=\"" << static_cast<long long>(slot) << "\">"
              << wall_clock(slot, config.clock_offset_s) << "</option>\n";
        }
        h << "</select></p>\n";
    }
    if (s.options.contains(ChoiceKind::ShiftContent) && !s.alternatives.empty()) {
        h << "<p><label><input type=\"radio\" name=\"choice\" value=\"ShiftContent\"> Watch a cached alternative</label>\n"
          << "<select name=\"alternative_content_id\">\n";
        for (const auto& a : s.alternatives) {
            h << "<option value=\"" << escape_html(a.content_id) << "\">"
              << escape_html(a.title.empty() ? a.content_id : a.title) << " (" << to_string(a.genre) << ")</option>\n";
        }
        h << "</select></p>\n";
    }
    h << "</fieldset>\n<button type=\"submit\">Submit</button>\n</form>\n</main>\n";
    if (ui_bundle) h << "<script src=\"/staggercast/ui/staging.js\" defer></script>\n";
    h << "</body>\n</html>\n";
    return h.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Core

ProxyCore::ProxyCore(std::shared_ptr<const ProxyConfig> config, std::shared_ptr<Upstream> upstream, Clock clock)
    : config_(std::move(config)),
      upstream_(std::move(upstream)),
      clock_(clock ? std::move(clock)
                   : Clock([] {
                         return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
                             .count();
                     })),
      sessions_(config_->session_expiry_s),
      bypass_({}, config_->bypass_ttl_s) {}

void ProxyCore::reload(std::shared_ptr<const ProxyConfig> config) {
    std::lock_guard lock(config_mu_);
    config_ = std::move(config);
}

std::shared_ptr<const ProxyConfig> ProxyCore::config() const {
    std::lock_guard lock(config_mu_);
    return config_;
}

std::vector<PrefetchJob> ProxyCore::prefetch_jobs() const {
    std::lock_guard lock(jobs_mu_);
    return jobs_;
}

HttpResponse ProxyCore::handle(const HttpRequest& request) {
    LogRecord log;
    HttpResponse response;
    try {
        response = dispatch(request, log);
    } catch (const UpstreamError& e) {
        response = text_response(502, std::string("upstream unreachable: ") + e.what() + "\n");
        log.decision = log.decision.empty() ? "Error" : log.decision;
    }
    if (log_sink_) {
        Json line{{"time", clock_()},
                  {"user", log.user},
                  {"domain", log.domain},
                  {"decision", log.decision},
                  {"choice", log.choice.empty() ? Json(nullptr) : Json(log.choice)},
                  {"bytes", response.body.size()}};
        log_sink_(line.dump());
    }
    return response;
}

HttpResponse ProxyCore::dispatch(const HttpRequest& request, LogRecord& log) {
    const auto config = this->config();
    const double now = clock_();
    const std::string user_name = request.headers.get(kUserHeader).value_or(request.remote_addr);
    log.user = user_name;

    auto parsed = request_url(request);
    if (!parsed || request.method == "CONNECT") {
        log.decision = "Malformed";
        return text_response(400, "malformed request\n");
    }
    Url url = std::move(*parsed);
    log.domain = url.host;

    if (url.path.starts_with(kControlPrefix)) return control(request, url, *config, log);

    if (auto marker = take_query_param(url.query, BypassSigner::kParam)) {
        if (bypass_.redeem(url.str(), *marker, now)) {
            log.decision = "Bypass";
            return forward(request, url);
        }
    }

    const auto managed = config->managed_domains.lookup(url.host);
    if (!managed) {
        log.decision = "Unmanaged";
        return forward(request, url);
    }
    const auto& [suffix, domain] = *managed;
    log.domain = suffix;

    Request r;
    r.user_id = user_id_of(user_name);
    r.app = domain.app_class;
    r.content_id = content_id_of(url);
    r.genre = domain.genre;
    r.size_bytes = domain.size_hint_bytes;
    r.arrival_s = now;
    r.live = domain.app_class == AppClass::LiveVideo ||
             std::find(domain.tags.begin(), domain.tags.end(), "live") != domain.tags.end();

    DecisionContext ctx;
    ctx.link_utilization = config->link_utilization;
    ctx.time_of_day_s = time_of_day(now + config->clock_offset_s);
    ctx.transit_price = transit_price(config->transit_price, ctx.time_of_day_s);
    ctx.download_size_bytes = r.size_bytes;
    ctx.qos_class = qos_of(r.app);
    const auto decision = users_.decide(r.user_id, day_index(now, config->clock_offset_s), config->ruleset, r, ctx);
    log.decision = std::string(decision.name());

    if (const auto* s = std::get_if<StageAction>(&decision.action)) {
        return stage(request, url, *config, *s, domain, user_name, r.user_id, now);
    }
    if (std::holds_alternative<RedirectAction>(decision.action)) {
        if (const auto* hit = config->cached(r.content_id)) return redirect_response(hit->url);
        log.decision = "Redirect-miss";
        return forward(request, url);
    }
    if (std::holds_alternative<RewriteAction>(decision.action)) {
        const auto it = config->users.find(user_name);
        if (it == config->users.end() || !it->second.consent_rewrite) {
            log.decision = "Rewrite-no-consent";
            return forward(request, url);
        }
        HttpRequest plain = request;
        plain.headers.erase("Accept-Encoding");
        auto response = forward(plain, url);
        const auto type = response.headers.get("Content-Type").value_or("");
        const auto encoding = response.headers.get("Content-Encoding").value_or("identity");
        if (type.find("text/html") != std::string::npos && iequals(encoding, "identity")) {
            response.body = rewrite_html(response.body, config->rewrite,
                                         [&](std::string_view id) { return config->cached(id) != nullptr; });
        }
        return response;
    }
    return forward(request, url);
}

HttpResponse ProxyCore::forward(const HttpRequest& request, const Url& url) {
    HttpRequest out;
    out.method = request.method;
    out.target = url.path_and_query();
    out.body = request.body;
    out.remote_addr = request.remote_addr;
    for (const auto& [k, v] : request.headers) {
        if (is_hop_by_hop(k) || iequals(k, kUserHeader) || iequals(k, "Host") || iequals(k, "Content-Length")) {
            continue;
        }
        out.headers.add(k, v);
    }
    out.headers.set("Host", url.authority());
    auto response = upstream_->fetch(out, url);
    HttpResponse clean;
    clean.status = response.status;
    clean.body = std::move(response.body);
    for (const auto& [k, v] : response.headers) {
        if (is_hop_by_hop(k) || iequals(k, "Content-Length")) continue;
        clean.headers.add(k, v);
    }
    return clean;
}

HttpResponse ProxyCore::stage(const HttpRequest& request, const Url& url, const ProxyConfig& config,
                              const StageAction& action, const ManagedDomain& domain, const std::string& user_name,
                              UserId user, double now) {
    StagingSession s;
    s.method = request.method;
    s.original_url = url;
    s.original_headers = request.headers;
    s.offer = action.offer;
    s.user = user;
    s.user_name = user_name;
    s.domain = url.host;
    s.content_id = content_id_of(url);
    s.size_bytes = domain.size_hint_bytes;
    s.transit_utilization = config.link_utilization[Resource::Transit];
    s.options.insert(ChoiceKind::Continue);
    if (action.options.contains(ChoiceKind::Delay)) {
        OfferOptions window;
        window.off_peak_window = config.off_peak_window;
        window.clock_offset_s = config.clock_offset_s;
        s.delay_window = next_off_peak(now, window);
        if (s.delay_window && !delay_slots(*s.delay_window, now).empty()) s.options.insert(ChoiceKind::Delay);
        else s.delay_window.reset();
    }
    if (action.options.contains(ChoiceKind::ShiftContent)) {
        for (const auto& item : config.cache_items) {
            if (item.content_id == s.content_id) continue;
            if (domain.genre != Genre::None && item.genre != domain.genre) continue;
            s.alternatives.push_back({item.content_id, item.title, item.genre, item.url, true});
        }
        if (!s.alternatives.empty()) s.options.insert(ChoiceKind::ShiftContent);
    }
    const std::string token = sessions_.create(std::move(s), now);
    const auto session = sessions_.find(token, now);
    if (wants_json(request)) return json_response(200, offer_json(*session, config, now));
    const bool ui = !config.ui_bundle_dir.empty() &&
                    std::filesystem::exists(std::filesystem::path(config.ui_bundle_dir) / "staging.js");
    auto response = text_response(200, render_interstitial(*session, config, now, ui), "text/html; charset=utf-8");
    response.headers.set("Cache-Control", "no-store");
    return response;
}

Json ProxyCore::offer_json(const StagingSession& s, const ProxyConfig& config, double now) const {
    Json options = Json::array();
    for (ChoiceKind k : all_values<ChoiceKind>()) {
        if (s.options.contains(k)) options.push_back(std::string(to_string(k)));
    }
    Json alternatives = Json::array();
    for (const auto& a : s.alternatives) {
        alternatives.push_back({{"content_id", a.content_id},
                                {"title", a.title},
                                {"genre", std::string(to_string(a.genre))},
                                {"cached", a.cached}});
    }
    Json out{{"token", s.token},
             {"kind", std::string(to_string(s.offer.kind))},
             {"magnitude", s.offer.magnitude},
             {"expiry_s", std::max(0.0, s.expires_s - now)},
             {"expires_at_s", s.expires_s},
             {"options", options},
             {"alternatives", alternatives},
             {"original_url", s.original_url.str()},
             {"transparency",
              {{"reason", "The access network is congested; shifting this transfer eases the peak."},
               {"transit_utilization", s.transit_utilization}}}};
    if (s.delay_window) {
        Json slots = Json::array();
        for (double t : delay_slots(*s.delay_window, now)) slots.push_back(t);
        out["delay_window"] = {{"begin_s", s.delay_window->begin}, {"end_s", s.delay_window->end}, {"slots", slots}};
        out["off_peak_window"] = {config.off_peak_window.start_s, config.off_peak_window.end_s};
    } else {
        out["delay_window"] = nullptr;
    }
    return out;
}

HttpResponse ProxyCore::control(const HttpRequest& request, const Url& url, const ProxyConfig& config,
                                LogRecord& log) {
    log.decision = "Control";
    const std::string rest = url.path.substr(kControlPrefix.size());
    if (rest.starts_with("offer/") && request.method == "GET") {
        const std::string token = rest.substr(6);
        const double now = clock_();
        const auto session = sessions_.find(token, now);
        const auto accept = request.headers.get("Accept").value_or("");
        const bool html = !wants_json(request) && accept.find("text/html") != std::string::npos;
        if (!session) {
            if (html) return text_response(410, "<!DOCTYPE html>\n<p>This offer has expired or was already answered.</p>\n",
                                           "text/html; charset=utf-8");
            return json_error(410, "unknown, expired or resolved token");
        }
        if (html) {
            const bool ui = !config.ui_bundle_dir.empty() &&
                            std::filesystem::exists(std::filesystem::path(config.ui_bundle_dir) / "staging.js");
            return text_response(200, render_interstitial(*session, config, now, ui), "text/html; charset=utf-8");
        }
        return json_response(200, offer_json(*session, config, now));
    }
    if (rest == "choice") {
        if (request.method != "POST") return text_response(405, "POST only\n");
        return choice_endpoint(request, config, log);
    }
    if (rest.starts_with("ui/") && request.method == "GET") return ui_asset(rest.substr(3), config);
    return text_response(404, "not found\n");
}

HttpResponse ProxyCore::choice_endpoint(const HttpRequest& request, const ProxyConfig& config, LogRecord& log) {
    const bool json_reply = body_is_json(request) || wants_json(request);
    auto fail = [&](int status, std::string message) {
        if (json_reply) return json_error(status, std::move(message));
        return text_response(status, "<!DOCTYPE html>\n<p>" + escape_html(message) + "</p>\n", "text/html; charset=utf-8");
    };

    std::map<std::string, std::string> fields;
    std::optional<double> new_access;
    bool new_access_malformed = false;
    if (body_is_json(request)) {
        const Json doc = Json::parse(request.body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) return fail(400, "malformed JSON body");
        for (const char* key : {"token", "choice", "alternative_content_id"}) {
            if (!doc.contains(key)) continue;
            if (!doc[key].is_string()) return fail(400, std::string(key) + " must be a string");
            fields[key] = doc[key].get<std::string>();
        }
        if (doc.contains("new_access_s") && !doc["new_access_s"].is_null()) {
            if (doc["new_access_s"].is_number()) new_access = doc["new_access_s"].get<double>();
            else new_access_malformed = true;
        }
    } else {
        fields = parse_params(request.body);
        if (const auto it = fields.find("new_access_s"); it != fields.end() && !it->second.empty()) {
            try {
                std::size_t used = 0;
                new_access = std::stod(it->second, &used);
                if (used != it->second.size()) new_access_malformed = true;
            } catch (const std::exception&) {
                new_access_malformed = true;
            }
        }
    }
    const auto token = fields["token"];
    if (token.empty()) return fail(400, "missing token");
    const auto kind = parse_enum<ChoiceKind>(fields["choice"]);
    if (!kind) return fail(400, "choice must be Continue, Delay or ShiftContent");
    log.choice = std::string(to_string(*kind));
    const std::string alternative_id = fields["alternative_content_id"];

    const double now = clock_();
    const auto res = sessions_.resolve(token, now, [&](const StagingSession& s) -> std::string {
        if (!s.options.contains(*kind)) return "choice not offered";
        if (*kind == ChoiceKind::Delay) {
            if (new_access_malformed) return "new_access_s must be a number";
            if (!new_access) return "missing new_access_s";
            if (!std::isfinite(*new_access) || *new_access <= now) return "new_access_s is in the past";
            if (*new_access < s.delay_window->begin || *new_access >= s.delay_window->end) {
                return "new_access_s is outside the off-peak window";
            }
        }
        if (*kind == ChoiceKind::ShiftContent) {
            if (alternative_id.empty()) return "missing alternative_content_id";
            const bool offered = std::any_of(s.alternatives.begin(), s.alternatives.end(),
                                             [&](const Alternative& a) { return a.content_id == alternative_id; });
            if (!offered) return "alternative_content_id was not offered";
        }
        return {};
    });
    if (res.outcome == SessionStore::Outcome::Gone) return fail(410, "unknown, expired or resolved token");
    if (res.outcome == SessionStore::Outcome::Rejected) return fail(400, res.error);

    const StagingSession& s = *res.session;
    log.domain = s.domain;
    log.user = s.user_name;
    const std::int64_t credits = credits_for(s.offer, config.credits_per_accept);
    switch (*kind) {
        case ChoiceKind::Continue: {
            users_.record_decline(s.user);
            const std::string original = s.original_url.str();
            return redirect_response(with_bypass(s.original_url, bypass_.mint(original, now)).str());
        }
        case ChoiceKind::Delay: {
            users_.record_accept(s.user, credits, "delay " + s.content_id, now);
            {
                std::lock_guard lock(jobs_mu_);
                jobs_.push_back({s.user, s.original_url.str(), s.content_id, s.size_bytes, *new_access});
            }
            const auto balance = users_.balance(s.user);
            if (json_reply) {
                return json_response(200, Json{{"status", "scheduled"},
                                               {"content_id", s.content_id},
                                               {"new_access_s", *new_access},
                                               {"credits_issued", credits},
                                               {"balance", balance}});
            }
            return text_response(200,
                                 "<!DOCTYPE html>\n<p class=\"confirmation\">Scheduled: <code>" +
                                     escape_html(s.original_url.str()) + "</code> will be ready by " +
                                     wall_clock(*new_access, config.clock_offset_s) + ". You earned " +
                                     std::to_string(credits) + " credits (balance " + std::to_string(balance) +
                                     ").</p>\n",
                                 "text/html; charset=utf-8");
        }
        case ChoiceKind::ShiftContent: {
            users_.record_accept(s.user, credits, "shift " + alternative_id, now);
            const auto it = std::find_if(s.alternatives.begin(), s.alternatives.end(),
                                         [&](const Alternative& a) { return a.content_id == alternative_id; });
            return redirect_response(it->url);
        }
    }
    return fail(400, "unreachable");
}

HttpResponse ProxyCore::ui_asset(const std::string& name, const ProxyConfig& config) {
    const bool safe = !name.empty() && name.find("..") == std::string::npos && name.front() != '/' &&
                      std::all_of(name.begin(), name.end(), [](char c) {
                          return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' ||
                                 c == '/';
                      });
    if (!safe || config.ui_bundle_dir.empty()) return text_response(404, "not found\n");
    std::ifstream in(std::filesystem::path(config.ui_bundle_dir) / name, std::ios::binary);
    if (!in) return text_response(404, "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    return text_response(200, body.str(), content_type_for(name));
}

}  // namespace staggercast::proxy
