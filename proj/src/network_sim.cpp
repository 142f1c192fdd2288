#include "staggercast/network_sim.hpp"

#include "staggercast/errors.hpp"
#include "staggercast/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>
#include <tuple>
#include <unordered_map>

namespace staggercast {

// ---------------------------------------------------------------------------
// Configuration

void validate(const NetConfig& c) {
    if (!(c.bin_s > 0.0) || !std::isfinite(c.bin_s)) throw ConfigError("/bin_s", "must be positive");
    for (Resource r : all_values<Resource>()) {
        if (c.capacity_bytes_per_bin[r] == 0) {
            throw ConfigError("/resources/" + std::string(to_string(r)) + "/capacity_bytes_per_bin", "must be positive");
        }
    }
    if (c.edge_cache_capacity_bytes == 0) throw ConfigError("/edge_cache_capacity_bytes", "must be positive");
    if (!(c.neighbor_hit_probability >= 0.0 && c.neighbor_hit_probability <= 1.0)) {
        throw ConfigError("/neighbor_hit_probability", "must be in [0, 1]");
    }
    if (!(c.prefetch_budget_fraction >= 0.0 && c.prefetch_budget_fraction <= 1.0)) {
        throw ConfigError("/prefetch_budget_fraction", "must be in [0, 1]");
    }
    if (c.patience_s && !(*c.patience_s >= 0.0)) throw ConfigError("/patience_s", "must be non-negative");
    if (c.credits_per_accept < 0) throw ConfigError("/credits_per_accept", "must be non-negative");
}

NetConfig parse_net_config(const Json& doc) {
    JsonObject obj(doc, "");
    NetConfig c;
    if (const Json* v = obj.optional("bin_s")) c.bin_s = as_number(*v, obj.child("bin_s"));
    if (const Json* v = obj.optional("resources")) {
        JsonObject res(*v, obj.child("resources"));
        for (Resource r : all_values<Resource>()) {
            const std::string name(to_string(r));
            if (const Json* rv = res.optional(name)) {
                JsonObject one(*rv, res.child(name));
                c.capacity_bytes_per_bin[r] =
                    as_uint(one.required("capacity_bytes_per_bin"), one.child("capacity_bytes_per_bin"));
                one.finish();
            }
        }
        res.finish();
    }
    if (const Json* v = obj.optional("edge_cache_capacity_bytes")) {
        c.edge_cache_capacity_bytes = as_uint(*v, obj.child("edge_cache_capacity_bytes"));
    }
    if (const Json* v = obj.optional("neighbor_hit_probability")) {
        c.neighbor_hit_probability = as_probability(*v, obj.child("neighbor_hit_probability"));
    }
    if (const Json* v = obj.optional("off_peak_window")) c.off_peak_window = as_window(*v, obj.child("off_peak_window"));
    if (const Json* v = obj.optional("prefetch_budget_fraction")) {
        c.prefetch_budget_fraction = as_probability(*v, obj.child("prefetch_budget_fraction"));
    }
    if (const Json* v = obj.optional("transit_price")) c.price_schedule = parse_price_schedule(*v, obj.child("transit_price"));
    if (const Json* v = obj.optional("patience_s")) {
        if (!v->is_null()) c.patience_s = as_number(*v, obj.child("patience_s"));
    }
    if (const Json* v = obj.optional("credits_per_accept")) c.credits_per_accept = as_int(*v, obj.child("credits_per_accept"));
    if (const Json* v = obj.optional("alternative_candidates")) {
        c.alternative_candidates = as_uint(*v, obj.child("alternative_candidates"));
    }
    obj.finish();
    validate(c);
    return c;
}

Json to_json(const NetConfig& c) {
    Json resources = Json::object();
    for (Resource r : all_values<Resource>()) {
        resources[std::string(to_string(r))] = {{"capacity_bytes_per_bin", c.capacity_bytes_per_bin[r]}};
    }
    Json price = Json::array();
    for (const auto& s : c.price_schedule.segments()) price.push_back({{"start_s", s.start_s}, {"price", s.price}});
    Json out = {{"bin_s", c.bin_s},
                {"resources", resources},
                {"edge_cache_capacity_bytes", c.edge_cache_capacity_bytes},
                {"neighbor_hit_probability", c.neighbor_hit_probability},
                {"off_peak_window", {c.off_peak_window.start_s, c.off_peak_window.end_s}},
                {"prefetch_budget_fraction", c.prefetch_budget_fraction},
                {"transit_price", price},
                {"patience_s", c.patience_s ? Json(*c.patience_s) : Json(nullptr)},
                {"credits_per_accept", c.credits_per_accept},
                {"alternative_candidates", c.alternative_candidates}};
    return out;
}

std::uint64_t prefetch_budget_per_bin(const NetConfig& c) {
    return static_cast<std::uint64_t>(
        std::floor(static_cast<double>(c.capacity_bytes_per_bin[Resource::Transit]) * c.prefetch_budget_fraction));
}

// ---------------------------------------------------------------------------
// Metrics

double peak_to_mean(std::span<const double> series) {
    if (series.empty()) throw PreconditionError("peak_to_mean of an empty series");
    double peak = 0.0;
    double sum = 0.0;
    for (double v : series) {
        if (!(v >= 0.0)) throw PreconditionError("peak_to_mean needs a non-negative series");
        peak = std::max(peak, v);
        sum += v;
    }
    if (sum == 0.0) throw PreconditionError("peak_to_mean of an all-zero series");
    return peak / (sum / static_cast<double>(series.size()));
}

double percentile(std::span<const double> series, double q) {
    if (series.empty()) throw PreconditionError("percentile of an empty series");
    if (!(q > 0.0 && q <= 1.0)) throw PreconditionError("percentile q must be in (0, 1]");
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<double> BinSeries::load() const {
    std::vector<double> out(served.size());
    for (std::size_t b = 0; b < served.size(); ++b) out[b] = static_cast<double>(served[b] + prefetch[b]);
    return out;
}

// ---------------------------------------------------------------------------
// Prefetch planning

PrefetchPlanner::PrefetchPlanner(std::size_t bins, double bin_s, std::uint64_t budget_per_bin)
    : bin_s_(bin_s), remaining_(bins, budget_per_bin) {
    if (!(bin_s > 0.0)) throw PreconditionError("bin width must be positive");
}

std::size_t PrefetchPlanner::bin_of(double t) const {
    if (remaining_.empty()) return 0;
    const double b = std::floor(t / bin_s_);
    if (b <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(b), remaining_.size() - 1);
}

std::optional<double> PrefetchPlanner::schedule(std::uint64_t size_bytes, TimeRange window, double deadline_s) {
    if (!(window.end > window.begin)) return std::nullopt;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(window.begin / bin_s_)));
    for (std::size_t b = first; b < remaining_.size(); ++b) {
        const double start = static_cast<double>(b) * bin_s_;
        if (start >= window.end) break;
        if (start + bin_s_ > deadline_s) break;
        if (remaining_[b] >= size_bytes) {
            remaining_[b] -= size_bytes;
            return std::max(start, window.begin);
        }
    }
    return std::nullopt;
}

void PrefetchPlanner::release(double start_s, std::uint64_t size_bytes) {
    remaining_.at(bin_of(start_s)) += size_bytes;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

enum class EventKind : std::uint8_t { Arrival = 0, PrefetchStart = 1, DeferredConsume = 2 };

struct Event {
    double time;
    EventKind kind;
    RequestId id;
    std::size_t index;  // position in the workload span

    auto key() const { return std::tuple(time, kind, id); }
    bool operator>(const Event& o) const { return key() > o.key(); }
};

struct UserState {
    std::int64_t day = -1;
    UserHistory history;
};

struct DeferredState {
    double new_access_s = 0.0;
    std::optional<double> prefetch_start_s;
    bool prefetched = false;  // bytes crossed transit at prefetch time
    bool cache_hit = false;   // content was already cached at prefetch time
};

struct ContentMeta {
    Genre genre = Genre::None;
};

bool cacheable(const Request& r) {
    return !r.live && (r.app == AppClass::VideoOnDemand || r.app == AppClass::P2P);
}

class Simulator {
public:
    Simulator(const SimInput& in, const SimOptions& opts)
        : in_(in),
          opts_(opts),
          bins_(static_cast<std::size_t>(std::ceil(in.horizon_s / in.net.bin_s))),
          planner_(bins_, in.net.bin_s, prefetch_budget_per_bin(in.net)),
          cache_(in.net.edge_cache_capacity_bytes, CacheTier::Edge),
          rng_(derive_seed(in.seed, {0x5157ULL})) {
        validate(in.net);
        if (!(in.horizon_s > 0.0)) throw PreconditionError("horizon must be positive");
        for (const auto& p : in.population) profiles_.emplace(p.user_id, &p);
        report_.bin_s = in.net.bin_s;
        report_.bins = bins_;
        for (Resource r : all_values<Resource>()) {
            auto& s = report_.series[r];
            s.offered.assign(bins_, 0);
            s.served.assign(bins_, 0);
            s.deferred.assign(bins_, 0);
            s.shifted.assign(bins_, 0);
            s.prefetch.assign(bins_, 0);
            s.utilization.assign(bins_, 0.0);
        }
        report_.dispositions.reserve(in.workload.size());
        for (const auto& r : in.workload) report_.dispositions.emplace_back(r.request_id, Disposition::Abandoned);
        decided_.assign(in.workload.size(), false);
    }

    SimReport run() {
        for (std::size_t i = 0; i < in_.workload.size(); ++i) {
            const auto& r = in_.workload[i];
            if (!(r.arrival_s >= 0.0) || r.arrival_s >= in_.horizon_s) {
                throw SimulationError("request " + std::to_string(r.request_id) + " arrives outside the horizon");
            }
            if (!profiles_.count(r.user_id)) {
                throw SimulationError("no profile for user " + std::to_string(r.user_id));
            }
            queue_.push({r.arrival_s, EventKind::Arrival, r.request_id, i});
        }
        while (!queue_.empty()) {
            const Event ev = queue_.top();
            queue_.pop();
            if (ev.time >= in_.horizon_s) throw SimulationError("event after the horizon");
            close_bins_before(bin_of(ev.time));
            switch (ev.kind) {
                case EventKind::Arrival: on_arrival(ev); break;
                case EventKind::PrefetchStart: on_prefetch(ev); break;
                case EventKind::DeferredConsume: on_consume(ev); break;
            }
        }
        close_bins_before(bins_);
        for (std::size_t i = 0; i < decided_.size(); ++i) {
            if (!decided_[i]) throw SimulationError("request left without a disposition");
        }
        summarize();
        return std::move(report_);
    }

private:
    std::size_t bin_of(double t) const {
        const double b = std::floor(t / in_.net.bin_s);
        if (b <= 0.0) return 0;
        return std::min(static_cast<std::size_t>(b), bins_ - 1);
    }

    void close_bins_before(std::size_t limit) {
        for (; closed_ < limit; ++closed_) {
            for (Resource r : all_values<Resource>()) {
                auto& s = report_.series[r];
                const std::uint64_t cap = in_.net.capacity_bytes_per_bin[r];
                const std::uint64_t pre = std::min(s.prefetch[closed_], cap);
                const std::uint64_t total = backlog_[r] + s.offered[closed_];
                s.served[closed_] = std::min(cap - pre, total);
                backlog_[r] = total - s.served[closed_];
                s.utilization[closed_] =
                    static_cast<double>(s.served[closed_] + s.prefetch[closed_]) / static_cast<double>(cap);
            }
        }
    }

    void decide(std::size_t index, Disposition d) {
        if (decided_[index]) throw SimulationError("request decided twice");
        decided_[index] = true;
        report_.dispositions[index].second = d;
        ++report_.summary.dispositions[d];
    }

    // Estimated wait before a new request on resource r starts being served.
    bool patient_enough(Resource r, double t) const {
        if (!in_.net.patience_s) return true;
        const std::size_t b = bin_of(t);
        const auto& s = report_.series[r];
        std::uint64_t cap = in_.net.capacity_bytes_per_bin[r];
        if (r == Resource::Transit) {
            const std::uint64_t reserved = prefetch_budget_per_bin(in_.net) - planner_.remaining(b);
            cap -= std::min(cap - 1, reserved);
        }
        const double ahead = static_cast<double>(backlog_[r] + s.offered[b]);
        const double bin_end = static_cast<double>(b + 1) * in_.net.bin_s;
        const double wait = ahead / static_cast<double>(cap) * in_.net.bin_s - (bin_end - t);
        return wait <= *in_.net.patience_s;
    }

    void demand(Resource r, double t, std::uint64_t bytes) { report_.series[r].offered[bin_of(t)] += bytes; }

    void fill_cache(const Request& r) {
        if (!cache_.fits(r.size_bytes) || cache_.contains(r.content_id)) return;
        cache_.insert(r.content_id, r.size_bytes);
        meta_[r.content_id] = {r.genre};
        trace(CacheOp::Kind::Insert, r.content_id, r.size_bytes, false);
    }

    bool cache_lookup(const std::string& id, std::uint64_t size) {
        const bool hit = cache_.lookup(id);
        ++report_.summary.cache_lookups;
        if (hit) ++report_.summary.cache_hits;
        trace(CacheOp::Kind::Lookup, id, size, hit);
        return hit;
    }

    void trace(CacheOp::Kind kind, const std::string& id, std::uint64_t size, bool hit) {
        if (opts_.record_cache_trace) report_.cache_trace.push_back({kind, id, size, hit});
    }

    void serve_original(const Request& r, double t, std::size_t index) {
        if (!patient_enough(Resource::Transit, t) || !patient_enough(Resource::Aggregation, t)) {
            decide(index, Disposition::Abandoned);
            return;
        }
        demand(Resource::Transit, t, r.size_bytes);
        demand(Resource::Aggregation, t, r.size_bytes);
        transit_path_bytes_ += r.size_bytes;
        report_.summary.delivered_bytes += r.size_bytes;
        decide(index, Disposition::ServedOriginal);
        if (cacheable(r)) fill_cache(r);
    }

    void serve_alternative(const Request& r, const std::string& alt, double t, std::size_t index) {
        const std::uint64_t alt_size = cache_.size_of(alt).value_or(0);
        if (!cache_lookup(alt, alt_size)) throw SimulationError("alternative '" + alt + "' is not cached");
        const std::size_t b = bin_of(t);
        report_.series[Resource::Transit].shifted[b] += r.size_bytes;
        report_.series[Resource::Aggregation].shifted[b] += r.size_bytes;
        demand(Resource::Aggregation, t, alt_size);
        report_.summary.cache_served_bytes += alt_size;
        report_.summary.delivered_bytes += alt_size;
        decide(index, Disposition::ServedAlternative);
    }

    std::vector<CatalogItem> catalog() const {
        std::vector<CatalogItem> items;
        for (auto& id : cache_.contents_mru(in_.net.alternative_candidates)) {
            const auto it = meta_.find(id);
            const Genre g = it == meta_.end() ? Genre::None : it->second.genre;
            const std::uint64_t size = cache_.size_of(id).value_or(0);
            items.push_back({std::move(id), g, size});
        }
        return items;
    }

    UserHistory& history_for(UserId user, double t) {
        auto& st = users_[user];
        const auto day = static_cast<std::int64_t>(std::floor((t + in_.clock_offset_s) / kSecondsPerDay));
        if (day != st.day) {
            st.day = day;
            st.history.prompts_today = 0;
        }
        st.history.credits = report_.ledger.balance(user);
        return st.history;
    }

    void credit(UserId user, const IncentiveOffer& offer, double t) {
        ++report_.summary.offers_accepted;
        ++users_[user].history.accepts_total;
        const std::int64_t points = credits_for(offer, in_.net.credits_per_accept);
        if (points > 0) {
            report_.ledger.issue_credits(user, points, "accepted " + std::string(to_string(offer.kind)), t);
            report_.summary.credits_issued += points;
        }
    }

    void on_arrival(const Event& ev) {
        const Request& r = in_.workload[ev.index];
        const double t = ev.time;
        if (!opts_.dsm_enabled) {
            serve_original(r, t, ev.index);
            return;
        }
        const UserProfile& profile = *profiles_.at(r.user_id);
        const std::size_t b = bin_of(t);
        DecisionContext ctx;
        if (b > 0) {
            for (Resource res : all_values<Resource>()) ctx.link_utilization[res] = report_.series[res].utilization[b - 1];
        }
        ctx.time_of_day_s = time_of_day(t + in_.clock_offset_s);
        ctx.transit_price = transit_price(in_.net.price_schedule, ctx.time_of_day_s);
        UserHistory& history = history_for(r.user_id, t);
        ctx.user_history = history;
        ctx.download_size_bytes = r.size_bytes;
        ctx.qos_class = qos_of(r.app);
        const EnactmentDecision decision = evaluate(in_.ruleset, r, ctx);
        history.prompts_today = ctx.user_history.prompts_today;

        if (const auto* stage = std::get_if<StageAction>(&decision.action)) {
            on_stage(r, ev.index, t, profile, *stage);
        } else if (std::holds_alternative<RewriteAction>(decision.action)) {
            on_rewrite(r, ev.index, t, profile);
        } else if (std::holds_alternative<RedirectAction>(decision.action)) {
            on_redirect(r, ev.index, t);
        } else {
            serve_original(r, t, ev.index);
        }
    }

    OfferOptions base_options() const {
        OfferOptions o;
        o.off_peak_window = in_.net.off_peak_window;
        o.clock_offset_s = in_.clock_offset_s;
        o.latest_access_s = in_.horizon_s;
        return o;
    }

    void on_stage(const Request& r, std::size_t index, double t, const UserProfile& profile, const StageAction& stage) {
        ++report_.summary.offers_made;
        OfferOptions options = base_options();
        options.kinds = EnumSet<ChoiceKind>{ChoiceKind::Continue};
        const auto window = next_off_peak(r.arrival_s, options);
        if (window && stage.options.contains(ChoiceKind::Delay)) options.kinds.insert(ChoiceKind::Delay);
        if (stage.options.contains(ChoiceKind::ShiftContent)) {
            const auto items = catalog();
            if (auto alt = pick_alternative(items, r, profile)) {
                options.kinds.insert(ChoiceKind::ShiftContent);
                options.alternative_content_id = std::move(alt);
            }
        }

        std::optional<UserChoice> choice;
        if (opts_.choice_override) choice = opts_.choice_override(r);
        if (!choice) choice = respond(profile, stage.offer, r, options, in_.acceptance, rng_);

        if (const auto* delay = std::get_if<DelayChoice>(&*choice)) {
            if (!options.kinds.contains(ChoiceKind::Delay)) throw SimulationError("Delay chosen but not offered");
            if (!(delay->new_access_s > r.arrival_s) || delay->new_access_s >= in_.horizon_s) {
                throw SimulationError("new access time must lie after arrival and before the horizon");
            }
            credit(r.user_id, stage.offer, t);
            defer(r, index, delay->new_access_s, *window);
        } else if (const auto* shift = std::get_if<ShiftContentChoice>(&*choice)) {
            if (!cache_.contains(shift->alternative_content_id)) throw SimulationError("alternative is not cached");
            credit(r.user_id, stage.offer, t);
            serve_alternative(r, shift->alternative_content_id, t, index);
        } else {
            ++users_[r.user_id].history.declines_total;
            serve_original(r, t, index);
        }
    }

    void defer(const Request& r, std::size_t index, double new_access_s, TimeRange window) {
        const std::size_t b = bin_of(r.arrival_s);
        report_.series[Resource::Transit].deferred[b] += r.size_bytes;
        report_.series[Resource::Aggregation].deferred[b] += r.size_bytes;

        DeferredState st;
        st.new_access_s = new_access_s;
        const TimeRange usable{window.begin, std::min(window.end, new_access_s)};
        if (usable.end > usable.begin) st.prefetch_start_s = planner_.schedule(r.size_bytes, usable, new_access_s);
        report_.deferrals.push_back({r.request_id, r.arrival_s, new_access_s, r.size_bytes, st.prefetch_start_s});
        if (st.prefetch_start_s) queue_.push({*st.prefetch_start_s, EventKind::PrefetchStart, r.request_id, index});
        queue_.push({new_access_s, EventKind::DeferredConsume, r.request_id, index});
        deferred_.emplace(index, st);
    }

    void on_prefetch(const Event& ev) {
        const Request& r = in_.workload[ev.index];
        auto& st = deferred_.at(ev.index);
        if (cache_lookup(r.content_id, r.size_bytes)) {
            planner_.release(ev.time, r.size_bytes);
            st.cache_hit = true;
            return;
        }
        report_.series[Resource::Transit].prefetch[bin_of(ev.time)] += r.size_bytes;
        prefetch_bytes_ += r.size_bytes;
        st.prefetched = true;
        if (cache_.fits(r.size_bytes)) {
            cache_.insert(r.content_id, r.size_bytes);
            meta_[r.content_id] = {r.genre};
            trace(CacheOp::Kind::Insert, r.content_id, r.size_bytes, false);
        }
    }

    void on_consume(const Event& ev) {
        const Request& r = in_.workload[ev.index];
        const auto st = deferred_.at(ev.index);
        if (!st.prefetched && !st.cache_hit) {
            serve_original(r, ev.time, ev.index);
            return;
        }
        demand(Resource::Aggregation, ev.time, r.size_bytes);
        report_.summary.delivered_bytes += r.size_bytes;
        if (st.cache_hit) report_.summary.cache_served_bytes += r.size_bytes;
        decide(ev.index, Disposition::ServedDeferred);
    }

    void on_rewrite(const Request& r, std::size_t index, double t, const UserProfile& profile) {
        const double u = uniform01(rng_);
        const auto items = catalog();
        const auto alt = pick_alternative(items, r, profile);
        if (alt) {
            const double uplift = profile.front_page_watcher ? in_.acceptance.front_page_uplift : 1.0;
            const double p = std::min(1.0, in_.acceptance.content_shift_base[profile.content_shift_propensity] * uplift);
            if (u < p) {
                serve_alternative(r, *alt, t, index);
                return;
            }
        }
        serve_original(r, t, index);
    }

    void on_redirect(const Request& r, std::size_t index, double t) {
        const double u = uniform01(rng_);
        const std::size_t b = bin_of(t);
        if (u < in_.net.neighbor_hit_probability) {
            report_.series[Resource::Transit].shifted[b] += r.size_bytes;
            report_.series[Resource::Aggregation].shifted[b] += r.size_bytes;
            report_.summary.home_served_bytes += r.size_bytes;
            report_.summary.delivered_bytes += r.size_bytes;
            decide(index, Disposition::ServedOriginal);
            return;
        }
        if (cache_lookup(r.content_id, r.size_bytes)) {
            report_.series[Resource::Transit].shifted[b] += r.size_bytes;
            demand(Resource::Aggregation, t, r.size_bytes);
            report_.summary.cache_served_bytes += r.size_bytes;
            report_.summary.delivered_bytes += r.size_bytes;
            decide(index, Disposition::ServedOriginal);
            return;
        }
        serve_original(r, t, index);
    }

    void summarize() {
        auto& sum = report_.summary;
        for (Resource res : all_values<Resource>()) {
            const auto& s = report_.series[res];
            auto& out = sum.resources[res];
            const auto load = s.load();
            out.peak = load.empty() ? 0.0 : *std::max_element(load.begin(), load.end());
            const double total = std::accumulate(load.begin(), load.end(), 0.0);
            out.peak_to_mean = total > 0.0 ? peak_to_mean(load) : 0.0;
            out.p95 = load.empty() ? 0.0 : percentile(load, 0.95);
            out.offered_bytes = std::accumulate(s.offered.begin(), s.offered.end(), std::uint64_t{0});
            out.served_bytes = std::accumulate(s.served.begin(), s.served.end(), std::uint64_t{0});
            out.prefetch_bytes = std::accumulate(s.prefetch.begin(), s.prefetch.end(), std::uint64_t{0});
            out.backlog_bytes = backlog_[res];
        }
        sum.transit_bytes = transit_path_bytes_ + prefetch_bytes_;
        sum.cache_hit_ratio =
            sum.cache_lookups == 0 ? 0.0 : static_cast<double>(sum.cache_hits) / static_cast<double>(sum.cache_lookups);
    }

    const SimInput& in_;
    const SimOptions& opts_;
    std::size_t bins_;
    PrefetchPlanner planner_;
    LruCache cache_;
    Rng rng_;
    SimReport report_;
    std::unordered_map<UserId, const UserProfile*> profiles_;
    std::unordered_map<UserId, UserState> users_;
    std::unordered_map<std::string, ContentMeta> meta_;
    std::unordered_map<std::size_t, DeferredState> deferred_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::vector<bool> decided_;
    EnumMap<Resource, std::uint64_t> backlog_{};
    std::size_t closed_ = 0;
    std::uint64_t transit_path_bytes_ = 0;
    std::uint64_t prefetch_bytes_ = 0;
};

}  // namespace

SimReport run(const SimInput& input, const SimOptions& options) {
    return Simulator(input, options).run();
}

// ---------------------------------------------------------------------------
// Output

Json summary_json(const SimReport& report) {
    const auto& s = report.summary;
    Json resources = Json::object();
    for (Resource r : all_values<Resource>()) {
        const auto& rs = s.resources[r];
        resources[std::string(to_string(r))] = {{"peak_to_mean", rs.peak_to_mean},
                                                {"p95", rs.p95},
                                                {"peak", rs.peak},
                                                {"offered_bytes", rs.offered_bytes},
                                                {"served_bytes", rs.served_bytes},
                                                {"prefetch_bytes", rs.prefetch_bytes},
                                                {"backlog_bytes", rs.backlog_bytes}};
    }
    Json dispositions = Json::object();
    for (Disposition d : all_values<Disposition>()) dispositions[std::string(to_string(d))] = s.dispositions[d];
    return {{"bin_s", report.bin_s},
            {"bins", report.bins},
            {"resources", resources},
            {"cache_hit_ratio", s.cache_hit_ratio},
            {"cache_lookups", s.cache_lookups},
            {"cache_hits", s.cache_hits},
            {"offers_made", s.offers_made},
            {"offers_accepted", s.offers_accepted},
            {"acceptance_rate", s.acceptance_rate()},
            {"credits_issued", s.credits_issued},
            {"dispositions", dispositions},
            {"bytes",
             {{"delivered", s.delivered_bytes},
              {"transit", s.transit_bytes},
              {"cache_served", s.cache_served_bytes},
              {"home_served", s.home_served_bytes}}}};
}

void write_series_csv(std::ostream& out, const SimReport& report) {
    out << kSeriesHeader << '\n';
    for (std::size_t b = 0; b < report.bins; ++b) {
        const std::string start = format_double(static_cast<double>(b) * report.bin_s);
        for (Resource r : all_values<Resource>()) {
            const auto& s = report.series[r];
            out << start << ',' << to_string(r) << ',' << s.offered[b] << ',' << s.served[b] << ',' << s.deferred[b]
                << ',' << s.shifted[b] << ',' << s.prefetch[b] << ',' << format_double(s.utilization[b]) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Forced deferral scenario

ChoiceOverride ForcedDeferralPlan::as_override() const {
    return [times = new_access_s](const Request& r) -> std::optional<UserChoice> {
        const auto it = times.find(r.request_id);
        if (it == times.end()) return UserChoice{ContinueChoice{}};
        return UserChoice{DelayChoice{it->second}};
    };
}

ForcedDeferralPlan plan_forced_deferral(std::span<const Request> workload, DayWindow peak_window, double fraction,
                                        const OfferOptions& window_options, double bin_s,
                                        const ShiftablePolicy& shiftable) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw PreconditionError("fraction must be in [0, 1]");
    if (!(bin_s > 0.0)) throw PreconditionError("bin width must be positive");
    ForcedDeferralPlan plan;
    struct Candidate {
        std::uint64_t size;
        RequestId id;
        TimeRange range;
    };
    std::map<std::int64_t, std::uint64_t> load;  // peak-window bytes per bin
    std::map<std::int64_t, std::vector<Candidate>> candidates;
    for (const auto& r : workload) {
        if (!peak_window.contains(time_of_day(r.arrival_s + window_options.clock_offset_s))) continue;
        plan.peak_window_bytes += r.size_bytes;
        const auto bin = static_cast<std::int64_t>(std::floor(r.arrival_s / bin_s));
        load[bin] += r.size_bytes;
        if (!classify_shiftable(r, shiftable)) continue;
        if (const auto range = next_off_peak(r.arrival_s, window_options)) {
            candidates[bin].push_back({r.size_bytes, r.request_id, *range});
        }
    }
    for (auto& [bin, list] : candidates) {
        // Largest first, lowest id first among equals.
        std::sort(list.begin(), list.end(),
                  [](const Candidate& a, const Candidate& b) { return std::tie(b.size, a.id) < std::tie(a.size, b.id); });
    }

    auto budget = static_cast<std::uint64_t>(std::floor(fraction * static_cast<double>(plan.peak_window_bytes)));
    std::vector<Candidate> picked;
    while (true) {
        std::optional<std::int64_t> best;
        std::size_t best_pos = 0;
        for (const auto& [bin, list] : candidates) {
            const auto it = std::find_if(list.begin(), list.end(), [&](const Candidate& c) { return c.size <= budget; });
            if (it == list.end()) continue;
            if (!best || load[bin] > load[*best]) {
                best = bin;
                best_pos = static_cast<std::size_t>(it - list.begin());
            }
        }
        if (!best) break;
        auto& list = candidates[*best];
        const Candidate c = list[best_pos];
        list.erase(list.begin() + static_cast<std::ptrdiff_t>(best_pos));
        load[*best] -= c.size;
        budget -= c.size;
        plan.deferred_bytes += c.size;
        picked.push_back(c);
    }

    std::sort(picked.begin(), picked.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
    const double n = static_cast<double>(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
        const auto& p = picked[i];
        const double t = p.range.begin + (static_cast<double>(i) + 0.5) / n * (p.range.end - p.range.begin);
        plan.new_access_s.emplace(p.id, t);
    }
    return plan;
}

}  // namespace staggercast
