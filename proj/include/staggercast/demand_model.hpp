#pragma once

#include "staggercast/json_fields.hpp"
#include "staggercast/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace staggercast {

/// One user demand event.
struct Request {
    RequestId request_id = 0;
    UserId user_id = 0;
    AppClass app = AppClass::Browsing;
    std::string content_id;
    Genre genre = Genre::None;
    std::uint64_t size_bytes = 0;
    double arrival_s = 0.0;
    bool live = false;

    friend bool operator==(const Request&, const Request&) = default;
};

/// Relative request volume over the day, stored normalized to mean 1.
/// Accepts 24 (hourly) or 96 (quarter-hour) slots.
class DiurnalProfile {
public:
    DiurnalProfile();  // flat
    explicit DiurnalProfile(std::vector<double> weights);

    /// Normalized weight at a time-of-day in seconds.
    double weight_at(double tod_s) const;
    double max_weight() const { return max_; }
    std::span<const double> weights() const { return weights_; }
    /// Weights as given, before normalization.
    std::span<const double> raw_weights() const { return raw_; }
    double slot_seconds() const { return kSecondsPerDay / static_cast<double>(weights_.size()); }

    /// Synthetic double-peak curve: a minor lunchtime bump and a major
    /// 18:00-23:00 evening peak. Illustrative, not measured.
    static DiurnalProfile evening_peak();
    /// Office-hours shape used for email and remote work.
    static DiurnalProfile daytime();

    friend bool operator==(const DiurnalProfile&, const DiurnalProfile&) = default;

private:
    std::vector<double> raw_;
    std::vector<double> weights_;
    double max_ = 1.0;
};

struct SizeDistribution {
    enum class Kind { Lognormal, Constant };
    Kind kind = Kind::Constant;
    double mu = 0.0;
    double sigma = 0.0;
    std::uint64_t value = 1;
    /// Lognormal draws are clamped to this; 0 means unbounded.
    std::uint64_t max_bytes = 0;

    static SizeDistribution lognormal(double mu, double sigma, std::uint64_t max_bytes = 0) {
        return {Kind::Lognormal, mu, sigma, 0, max_bytes};
    }
    static SizeDistribution constant(std::uint64_t v) { return {Kind::Constant, 0.0, 0.0, v, 0}; }

    /// Draw a transfer size; never returns less than 1 byte.
    std::uint64_t sample(std::mt19937_64& rng) const;

    friend bool operator==(const SizeDistribution&, const SizeDistribution&) = default;
};

struct AppWorkload {
    DiurnalProfile diurnal;
    double mean_rate_per_user_per_day = 0.0;
    SizeDistribution size_distribution;
    EnumMap<Genre, double> genre_mix{};
    /// Distinct items per genre; popularity within a genre is Zipf(catalog_size, zipf_exponent).
    std::uint32_t catalog_size = 500;
    double zipf_exponent = 0.8;

    friend bool operator==(const AppWorkload&, const AppWorkload&) = default;
};

struct WorkloadConfig {
    double horizon_s = kSecondsPerDay;
    double bin_s = 300.0;
    std::uint64_t population_size = 0;
    EnumMap<AppClass, std::optional<AppWorkload>> apps{};
    std::uint64_t seed = 0;
    /// Wall-clock time-of-day corresponding to t = 0.
    double clock_offset_s = 0.0;

    friend bool operator==(const WorkloadConfig&, const WorkloadConfig&) = default;
};

/// Throws ConfigError naming the offending field.
void validate(const WorkloadConfig& config);
WorkloadConfig parse_workload_config(const Json& doc);
Json to_json(const WorkloadConfig& config);

/// Day starting at 06:00 so the evening peak and the following night both
/// fall inside the horizon. About 1e5 requests with the default population.
WorkloadConfig default_workload_config();

/// Nonhomogeneous Poisson arrivals per application class, built by thinning
/// a homogeneous process at the peak rate. Sorted by arrival; request ids are
/// assigned 0..n-1 in that order.
std::vector<Request> generate_workload(const WorkloadConfig& config);

/// Trace CSV header, exact.
inline constexpr std::string_view kTraceHeader = "arrival_s,user_id,app_class,content_id,genre,size_bytes,live";

std::vector<Request> parse_trace(std::istream& in);
std::vector<Request> load_trace(const std::filesystem::path& path);
void write_trace(std::ostream& out, std::span<const Request> requests);

struct ShiftablePolicy {
    EnumSet<AppClass> shiftable_apps{AppClass::VideoOnDemand, AppClass::LiveVideo, AppClass::BulkSync, AppClass::P2P};
    std::uint64_t min_size_bytes = 100'000'000;
};

/// Long-lived, non-live transfers of a shiftable class.
bool classify_shiftable(const Request& request, const ShiftablePolicy& policy = {});

/// Arrival counts per bin of width `bin_s` over [0, horizon_s).
std::vector<std::uint64_t> arrivals_per_bin(std::span<const Request> requests, double horizon_s, double bin_s);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace staggercast
