#include "staggercast/demand_model.hpp"

#include "staggercast/errors.hpp"
#include "staggercast/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace staggercast {

// ---------------------------------------------------------------------------
// DiurnalProfile

DiurnalProfile::DiurnalProfile() : raw_(24, 1.0), weights_(24, 1.0), max_(1.0) {}

DiurnalProfile::DiurnalProfile(std::vector<double> weights) : raw_(weights), weights_(std::move(weights)) {
    if (weights_.size() != 24 && weights_.size() != 96) {
        throw PreconditionError("diurnal profile needs 24 or 96 weights, got " + std::to_string(weights_.size()));
    }
    double sum = 0.0;
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0) throw PreconditionError("diurnal weights must be finite and non-negative");
        sum += w;
    }
    if (sum <= 0.0) throw PreconditionError("diurnal profile needs at least one positive weight");
    const double mean = sum / static_cast<double>(weights_.size());
    for (double& w : weights_) w /= mean;
    max_ = *std::max_element(weights_.begin(), weights_.end());
}

double DiurnalProfile::weight_at(double tod_s) const {
    auto slot = static_cast<std::size_t>(time_of_day(tod_s) / slot_seconds());
    return weights_[std::min(slot, weights_.size() - 1)];
}

DiurnalProfile DiurnalProfile::evening_peak() {
    return DiurnalProfile({0.55, 0.35, 0.20, 0.15, 0.12, 0.15, 0.30, 0.50, 0.65, 0.70, 0.75, 0.85,
                           1.05, 1.10, 0.90, 0.85, 0.90, 1.05, 1.40, 1.75, 2.00, 2.00, 1.60, 1.00});
}

DiurnalProfile DiurnalProfile::daytime() {
    return DiurnalProfile({0.10, 0.05, 0.05, 0.05, 0.05, 0.10, 0.30, 0.80, 1.60, 2.00, 2.00, 1.80,
                           1.40, 1.80, 2.00, 1.90, 1.70, 1.30, 0.80, 0.60, 0.50, 0.40, 0.30, 0.20});
}

// ---------------------------------------------------------------------------
// Sampling helpers

namespace {

double standard_normal(Rng& rng) {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Inverse-CDF sampling over a cumulative table.
std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
    const double u = uniform01(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> zipf_cdf(std::uint32_t n, double exponent) {
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::uint32_t k = 0; k < n; ++k) {
        acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
        cdf[k] = acc;
    }
    return cdf;
}

std::string lower(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::uint64_t SizeDistribution::sample(Rng& rng) const {
    if (kind == Kind::Constant) return std::max<std::uint64_t>(value, 1);
    const double draw = std::exp(mu + sigma * standard_normal(rng));
    std::uint64_t bytes = draw < 1.8e19 ? static_cast<std::uint64_t>(std::llround(draw))
                                        : std::numeric_limits<std::uint64_t>::max() / 2;
    if (max_bytes != 0) bytes = std::min(bytes, max_bytes);
    return std::max<std::uint64_t>(bytes, 1);
}

// ---------------------------------------------------------------------------
// Config

void validate(const WorkloadConfig& config) {
    if (!(config.bin_s > 0.0)) throw ConfigError("/bin_s", "must be positive");
    if (!(config.horizon_s > 0.0)) throw ConfigError("/horizon_s", "must be positive");
    const double bins = config.horizon_s / config.bin_s;
    if (std::abs(bins - std::round(bins)) > 1e-9) throw ConfigError("/horizon_s", "must be a multiple of bin_s");
    if (config.clock_offset_s < 0.0 || config.clock_offset_s >= kSecondsPerDay) {
        throw ConfigError("/clock_offset_s", "must lie in [0, 86400)");
    }
    for (AppClass app : all_values<AppClass>()) {
        const auto& spec = config.apps[app];
        if (!spec) continue;
        const std::string base = "/apps/" + std::string(to_string(app));
        if (!(spec->mean_rate_per_user_per_day >= 0.0) || !std::isfinite(spec->mean_rate_per_user_per_day)) {
            throw ConfigError(base + "/mean_rate_per_user_per_day", "must be a non-negative finite rate");
        }
        double total = 0.0;
        for (double p : spec->genre_mix.values) {
            if (p < 0.0 || p > 1.0) throw ConfigError(base + "/genre_mix", "probabilities must be in [0, 1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError(base + "/genre_mix", "probabilities must sum to 1");
        const auto& sd = spec->size_distribution;
        if (sd.kind == SizeDistribution::Kind::Lognormal && (!(sd.sigma >= 0.0) || !std::isfinite(sd.mu))) {
            throw ConfigError(base + "/size_distribution", "lognormal needs finite mu and sigma >= 0");
        }
        if (spec->catalog_size == 0) throw ConfigError(base + "/catalog_size", "must be at least 1");
        if (!(spec->zipf_exponent >= 0.0)) throw ConfigError(base + "/zipf_exponent", "must be non-negative");
    }
}

namespace {

SizeDistribution parse_size(const Json& doc, const std::string& path) {
    JsonObject obj(doc, path);
    const auto type = as_string(obj.required("type"), obj.child("type"));
    SizeDistribution out;
    if (type == "lognormal") {
        out = SizeDistribution::lognormal(as_number(obj.required("mu"), obj.child("mu")),
                                          as_number(obj.required("sigma"), obj.child("sigma")));
        if (const Json* v = obj.optional("max_bytes")) out.max_bytes = as_uint(*v, obj.child("max_bytes"));
    } else if (type == "constant") {
        out = SizeDistribution::constant(as_uint(obj.required("value"), obj.child("value")));
    } else {
        throw ConfigError(obj.child("type"), "expected 'lognormal' or 'constant'");
    }
    obj.finish();
    return out;
}

AppWorkload parse_app(const Json& doc, const std::string& path) {
    JsonObject obj(doc, path);
    AppWorkload app;
    const Json& diurnal = obj.required("diurnal");
    if (diurnal.is_string()) {
        const auto name = diurnal.get<std::string>();
        if (name == "evening_peak") app.diurnal = DiurnalProfile::evening_peak();
        else if (name == "daytime") app.diurnal = DiurnalProfile::daytime();
        else if (name == "flat") app.diurnal = DiurnalProfile();
        else throw ConfigError(obj.child("diurnal"), "unknown named profile '" + name + "'");
    } else {
        if (!diurnal.is_array()) throw ConfigError(obj.child("diurnal"), "expected an array of weights or a profile name");
        std::vector<double> weights;
        for (std::size_t i = 0; i < diurnal.size(); ++i) {
            weights.push_back(as_number(diurnal[i], obj.child("diurnal") + "/" + std::to_string(i)));
        }
        try {
            app.diurnal = DiurnalProfile(std::move(weights));
        } catch (const PreconditionError& e) {
            throw ConfigError(obj.child("diurnal"), e.what());
        }
    }
    app.mean_rate_per_user_per_day =
        as_number(obj.required("mean_rate_per_user_per_day"), obj.child("mean_rate_per_user_per_day"));
    app.size_distribution = parse_size(obj.required("size_distribution"), obj.child("size_distribution"));
    {
        const std::string mix_path = obj.child("genre_mix");
        JsonObject mix(obj.required("genre_mix"), mix_path);
        for (Genre g : all_values<Genre>()) {
            if (const Json* p = mix.optional(to_string(g))) app.genre_mix[g] = as_number(*p, mix.child(to_string(g)));
        }
        mix.finish();
    }
    if (const Json* v = obj.optional("catalog_size")) {
        const auto n = as_uint(*v, obj.child("catalog_size"));
        if (n == 0 || n > 10'000'000) throw ConfigError(obj.child("catalog_size"), "must be in [1, 1e7]");
        app.catalog_size = static_cast<std::uint32_t>(n);
    }
    if (const Json* v = obj.optional("zipf_exponent")) app.zipf_exponent = as_number(*v, obj.child("zipf_exponent"));
    obj.finish();
    return app;
}

Json size_to_json(const SizeDistribution& sd) {
    if (sd.kind == SizeDistribution::Kind::Constant) return {{"type", "constant"}, {"value", sd.value}};
    Json out = {{"type", "lognormal"}, {"mu", sd.mu}, {"sigma", sd.sigma}};
    if (sd.max_bytes != 0) out["max_bytes"] = sd.max_bytes;
    return out;
}

}  // namespace

WorkloadConfig parse_workload_config(const Json& doc) {
    JsonObject obj(doc, "");
    WorkloadConfig config;
    config.horizon_s = as_number(obj.required("horizon_s"), "/horizon_s");
    config.bin_s = as_number(obj.required("bin_s"), "/bin_s");
    config.population_size = as_uint(obj.required("population_size"), "/population_size");
    if (const Json* v = obj.optional("seed")) config.seed = as_uint(*v, "/seed");
    if (const Json* v = obj.optional("clock_offset_s")) config.clock_offset_s = as_number(*v, "/clock_offset_s");
    JsonObject apps(obj.required("apps"), "/apps");
    for (AppClass app : all_values<AppClass>()) {
        if (const Json* a = apps.optional(to_string(app))) config.apps[app] = parse_app(*a, apps.child(to_string(app)));
    }
    apps.finish();
    obj.finish();
    validate(config);
    return config;
}

Json to_json(const WorkloadConfig& config) {
    Json apps = Json::object();
    for (AppClass app : all_values<AppClass>()) {
        const auto& spec = config.apps[app];
        if (!spec) continue;
        Json mix = Json::object();
        for (Genre g : all_values<Genre>()) {
            if (spec->genre_mix[g] > 0.0) mix[std::string(to_string(g))] = spec->genre_mix[g];
        }
        const auto w = spec->diurnal.raw_weights();
        apps[std::string(to_string(app))] = {
            {"diurnal", std::vector<double>(w.begin(), w.end())},
            {"mean_rate_per_user_per_day", spec->mean_rate_per_user_per_day},
            {"size_distribution", size_to_json(spec->size_distribution)},
            {"genre_mix", mix},
            {"catalog_size", spec->catalog_size},
            {"zipf_exponent", spec->zipf_exponent},
        };
    }
    return {{"horizon_s", config.horizon_s},         {"bin_s", config.bin_s},
            {"population_size", config.population_size}, {"seed", config.seed},
            {"clock_offset_s", config.clock_offset_s}, {"apps", apps}};
}

WorkloadConfig default_workload_config() {
    WorkloadConfig config;
    config.horizon_s = kSecondsPerDay;
    config.bin_s = 300.0;
    config.population_size = 2800;
    config.seed = 1;
    config.clock_offset_s = 6 * 3600.0;

    auto mix = [](std::initializer_list<std::pair<Genre, double>> items) {
        EnumMap<Genre, double> m{};
        for (auto [g, p] : items) m[g] = p;
        return m;
    };
    const auto video_mix = mix({{Genre::Sport, 0.15}, {Genre::Movie, 0.30}, {Genre::Series, 0.35},
                                {Genre::Music, 0.05}, {Genre::Other, 0.15}});
    const auto no_genre = mix({{Genre::None, 1.0}});
    const auto evening = DiurnalProfile::evening_peak();
    const auto daytime = DiurnalProfile::daytime();

    // Rates are per user per day; sizes are lognormal in bytes (median = e^mu).
    config.apps[AppClass::VideoOnDemand] =
        AppWorkload{evening, 2.0, SizeDistribution::lognormal(std::log(6.0e8), 0.8, 4'000'000'000), video_mix, 400, 0.8};
    config.apps[AppClass::LiveVideo] = AppWorkload{
        evening, 0.3, SizeDistribution::lognormal(std::log(1.0e9), 0.6, 4'000'000'000),
        mix({{Genre::Sport, 0.6}, {Genre::Music, 0.1}, {Genre::Other, 0.3}}), 40, 0.8};
    config.apps[AppClass::Gaming] = AppWorkload{evening, 1.0, SizeDistribution::constant(5'000'000), no_genre, 50, 0.8};
    config.apps[AppClass::Email] = AppWorkload{daytime, 10.0, SizeDistribution::constant(100'000), no_genre, 1000, 0.0};
    config.apps[AppClass::RemoteWork] =
        AppWorkload{daytime, 2.0, SizeDistribution::lognormal(std::log(2.0e6), 1.0, 200'000'000), no_genre, 1000, 0.5};
    config.apps[AppClass::Browsing] =
        AppWorkload{evening, 20.0, SizeDistribution::lognormal(std::log(2.0e6), 1.2, 200'000'000), no_genre, 5000, 0.9};
    config.apps[AppClass::BulkSync] =
        AppWorkload{DiurnalProfile(), 0.5, SizeDistribution::lognormal(std::log(2.0e8), 1.2, 4'000'000'000), no_genre, 1000, 0.3};
    config.apps[AppClass::P2P] =
        AppWorkload{evening, 0.2, SizeDistribution::lognormal(std::log(1.0e9), 1.0, 4'000'000'000), video_mix, 200, 0.6};
    return config;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Request> generate_workload(const WorkloadConfig& config) {
    validate(config);
    std::vector<Request> out;
    const double population = static_cast<double>(config.population_size);

    for (AppClass app : all_values<AppClass>()) {
        const auto& spec = config.apps[app];
        if (!spec || spec->mean_rate_per_user_per_day == 0.0 || config.population_size == 0) continue;

        Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(app)}));
        Rng catalog_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(app), 0xca7a109ULL}));

        // Per-(genre, rank) sizes fixed up front so a content id always has one size.
        EnumMap<Genre, std::vector<std::uint64_t>> catalog_sizes{};
        std::vector<double> genre_cdf;
        std::vector<Genre> genres;
        double acc = 0.0;
        for (Genre g : all_values<Genre>()) {
            if (spec->genre_mix[g] <= 0.0) continue;
            acc += spec->genre_mix[g];
            genre_cdf.push_back(acc);
            genres.push_back(g);
            auto& sizes = catalog_sizes[g];
            sizes.resize(spec->catalog_size);
            for (auto& s : sizes) s = spec->size_distribution.sample(catalog_rng);
        }
        const auto rank_cdf = zipf_cdf(spec->catalog_size, spec->zipf_exponent);
        const std::string slug = lower(to_string(app));

        const double base_rate = population * spec->mean_rate_per_user_per_day / kSecondsPerDay;
        const double peak_rate = base_rate * spec->diurnal.max_weight();
        double t = 0.0;
        while (true) {
            t += exponential(rng, peak_rate);
            if (t >= config.horizon_s) break;
            const double w = spec->diurnal.weight_at(t + config.clock_offset_s);
            if (uniform01(rng) * spec->diurnal.max_weight() >= w) continue;

            Request r;
            r.app = app;
            r.arrival_s = t;
            r.user_id = static_cast<UserId>(uniform01(rng) * population);
            r.genre = genres[sample_cdf(genre_cdf, rng)];
            const auto rank = sample_cdf(rank_cdf, rng);
            r.size_bytes = catalog_sizes[r.genre][rank];
            r.content_id = slug + "/" + lower(to_string(r.genre)) + "/" + std::to_string(rank);
            r.live = app == AppClass::LiveVideo;
            out.push_back(std::move(r));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].request_id = i;
    return out;
}

// ---------------------------------------------------------------------------
// Trace CSV

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::vector<Request> parse_trace(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line()) throw TraceError(1, "missing header");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    if (line != kTraceHeader) throw TraceError(1, "expected header '" + std::string(kTraceHeader) + "'");

    std::vector<Request> out;
    while (next_line()) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 7) throw TraceError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
        Request r;
        r.request_id = out.size();
        if (!parse_number(f[0], r.arrival_s) || !std::isfinite(r.arrival_s) || r.arrival_s < 0.0) {
            throw TraceError(line_no, "invalid arrival_s '" + std::string(f[0]) + "'");
        }
        if (!parse_number(f[1], r.user_id)) throw TraceError(line_no, "invalid user_id '" + std::string(f[1]) + "'");
        if (auto app = parse_enum<AppClass>(f[2])) r.app = *app;
        else throw TraceError(line_no, "unknown app class '" + std::string(f[2]) + "'");
        r.content_id = std::string(f[3]);
        if (auto genre = parse_enum<Genre>(f[4])) r.genre = *genre;
        else throw TraceError(line_no, "unknown genre '" + std::string(f[4]) + "'");
        if (!f[5].empty() && f[5].front() == '-') throw TraceError(line_no, "negative size_bytes");
        if (!parse_number(f[5], r.size_bytes)) throw TraceError(line_no, "invalid size_bytes '" + std::string(f[5]) + "'");
        if (f[6] == "1") r.live = true;
        else if (f[6] == "0") r.live = false;
        else throw TraceError(line_no, "live must be 0 or 1");
        if (r.live && r.app != AppClass::LiveVideo) throw TraceError(line_no, "live=1 requires app_class LiveVideo");
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
    return out;
}

std::vector<Request> load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError(0, "cannot open " + path.string());
    return parse_trace(in);
}

void write_trace(std::ostream& out, std::span<const Request> requests) {
    out << kTraceHeader << '\n';
    for (const auto& r : requests) {
        if (r.content_id.find_first_of(",\n\r") != std::string::npos) {
            throw PreconditionError("content_id '" + r.content_id + "' cannot be written to CSV");
        }
        out << format_double(r.arrival_s) << ',' << r.user_id << ',' << to_string(r.app) << ',' << r.content_id << ','
            << to_string(r.genre) << ',' << r.size_bytes << ',' << (r.live ? '1' : '0') << '\n';
    }
}

// ---------------------------------------------------------------------------

bool classify_shiftable(const Request& request, const ShiftablePolicy& policy) {
    return policy.shiftable_apps.contains(request.app) && request.size_bytes >= policy.min_size_bytes && !request.live;
}

std::vector<std::uint64_t> arrivals_per_bin(std::span<const Request> requests, double horizon_s, double bin_s) {
    const auto bins = static_cast<std::size_t>(std::llround(horizon_s / bin_s));
    std::vector<std::uint64_t> counts(bins, 0);
    for (const auto& r : requests) {
        const auto b = static_cast<std::size_t>(r.arrival_s / bin_s);
        if (b < bins) ++counts[b];
    }
    return counts;
}

}  // namespace staggercast
